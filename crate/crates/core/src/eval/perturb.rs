//! Environment drift: landmarks move, trajectories and walls stay put.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TngError};
use crate::eval::laps::{run_lap_experiment, LapConfig};
use crate::eval::supervisor::SupervisorConfig;
use crate::policy::Policy;
use crate::scalar::Scalar;
use crate::sim::{derive_seed, Environment, TrajectoryId};

/// Copy of `env` with every landmark displaced by an isotropic Gaussian of
/// scale `magnitude` metres per axis and observation noise reseeded to `seed`.
/// Arena walls keep their original extent.
pub fn perturb_environment<T: Scalar>(
    env: &Environment<T>,
    magnitude: T,
    seed: u64,
) -> Result<Environment<T>> {
    if !(magnitude >= T::zero()) || !magnitude.is_finite() {
        return Err(TngError::InvalidInput(format!(
            "perturbation magnitude {magnitude} must be >= 0"
        )));
    }
    let mut spec = env.to_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x7065_7274));
    for l in &mut spec.landmarks {
        let dx: f64 = StandardNormal.sample(&mut rng);
        let dy: f64 = StandardNormal.sample(&mut rng);
        l[0] = l[0] + magnitude * T::lit(dx);
        l[1] = l[1] + magnitude * T::lit(dy);
    }
    spec.noise_seed = Some(seed);
    let mut out = Environment::build(&spec)?;
    out.bounds = env.bounds;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct DegradationConfig<T> {
    pub magnitudes: Vec<T>,
    pub laps: LapConfig<T>,
    pub supervisor: SupervisorConfig<T>,
}

impl<T: Scalar> Default for DegradationConfig<T> {
    fn default() -> Self {
        Self {
            magnitudes: [0.0, 0.1, 0.2, 0.4].map(T::lit).to_vec(),
            laps: LapConfig::default(),
            supervisor: SupervisorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DegradationRow<T> {
    pub controller: String,
    /// PA at each magnitude.
    pub pa: Vec<T>,
    /// `pa[k] - pa[0]`.
    pub delta: Vec<T>,
    pub interventions: Vec<usize>,
    pub laps_completed: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DegradationReport<T> {
    pub trajectory: TrajectoryId,
    pub magnitudes: Vec<T>,
    pub rows: Vec<DegradationRow<T>>,
}

/// Lap experiment for every controller on `traj` in each perturbed copy of
/// `env`. One perturbation seed is shared by all magnitudes so the landmark
/// displacement directions are the same and only their scale grows.
pub fn run_degradation_study<T, P>(
    controllers: &[(String, P)],
    env: &Environment<T>,
    traj: TrajectoryId,
    cfg: &DegradationConfig<T>,
    seed: u64,
    jobs: usize,
) -> Result<DegradationReport<T>>
where
    T: Scalar,
    P: Policy<T> + Clone + Send + Sync,
{
    if cfg.magnitudes.is_empty() {
        return Err(TngError::InvalidInput(
            "degradation study needs at least one magnitude".into(),
        ));
    }
    let worlds = cfg
        .magnitudes
        .iter()
        .map(|&m| perturb_environment(env, m, seed))
        .collect::<Result<Vec<_>>>()?;
    let runs: Vec<(usize, usize)> = (0..controllers.len())
        .flat_map(|c| (0..worlds.len()).map(move |k| (c, k)))
        .collect();
    let run = |&(c, k): &(usize, usize)| {
        let mut policy = controllers[c].1.clone();
        run_lap_experiment(
            &mut policy,
            &worlds[k],
            traj,
            &cfg.supervisor,
            &cfg.laps,
            derive_seed(seed, k as u64),
        )
    };
    let reports = if jobs == 1 {
        runs.iter().map(run).collect::<Result<Vec<_>>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| TngError::InvalidInput(format!("thread pool: {e}")))?;
        pool.install(|| runs.par_iter().map(run).collect::<Result<Vec<_>>>())?
    };
    let m = worlds.len();
    let rows = controllers
        .iter()
        .enumerate()
        .map(|(c, (name, _))| {
            let mine = &reports[c * m..(c + 1) * m];
            let pa: Vec<T> = mine.iter().map(|r| r.pa).collect();
            DegradationRow {
                controller: name.clone(),
                delta: pa.iter().map(|&p| p - pa[0]).collect(),
                pa,
                interventions: mine.iter().map(|r| r.log.interventions.len()).collect(),
                laps_completed: mine.iter().map(|r| r.laps_completed).collect(),
            }
        })
        .collect();
    Ok(DegradationReport {
        trajectory: traj,
        magnitudes: cfg.magnitudes.clone(),
        rows,
    })
}
