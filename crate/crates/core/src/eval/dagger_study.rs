use serde::{Deserialize, Serialize};

use crate::error::{Result, TngError};
use crate::eval::laps::{run_lap_experiment, LapConfig};
use crate::eval::supervisor::SupervisorConfig;
use crate::imitation::{
    dagger_iterate, train_regression, Dataset, ExpertConfig, RegressionController, TrainConfig,
};
use crate::scalar::Scalar;
use crate::sim::{derive_seed, Environment, TrajectoryId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct DaggerConfig<T> {
    pub iterations: usize,
    /// Learner ticks per aggregation rollout; `None` means one nominal lap.
    pub rollout_ticks: Option<usize>,
    pub dt: T,
    pub expert: ExpertConfig<T>,
    pub train: TrainConfig<T>,
    pub supervisor: SupervisorConfig<T>,
    pub laps: LapConfig<T>,
}

impl<T: Scalar> Default for DaggerConfig<T> {
    fn default() -> Self {
        Self {
            iterations: 3,
            rollout_ticks: None,
            dt: T::lit(0.1),
            expert: ExpertConfig::default(),
            train: TrainConfig::default(),
            supervisor: SupervisorConfig::default(),
            laps: LapConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DaggerIteration<T> {
    /// 0 is the controller fitted on the initial dataset.
    pub iteration: usize,
    pub dataset_size: usize,
    pub interventions: usize,
    pub pa: T,
}

#[derive(Debug, Clone)]
pub struct DaggerStudy<T> {
    pub trajectory: TrajectoryId,
    pub iterations: Vec<DaggerIteration<T>>,
    pub controller: RegressionController<T>,
    pub dataset: Dataset<T>,
}

/// Fits a regression controller on `base`, then alternates learner rollouts
/// relabelled by the expert with refits. Every controller, the initial one
/// included, is scored by the same supervised lap experiment.
pub fn run_dagger_study<T: Scalar>(
    env: &Environment<T>,
    traj_id: TrajectoryId,
    base: &Dataset<T>,
    cfg: &DaggerConfig<T>,
    seed: u64,
) -> Result<DaggerStudy<T>> {
    let traj = env
        .trajectory(traj_id)
        .ok_or_else(|| TngError::InvalidInput(format!("unknown trajectory {traj_id}")))?;
    let hash = env.featurizer.hash();
    let ticks = match cfg.rollout_ticks {
        Some(t) => t,
        None => (traj.length() / (cfg.expert.cruise_speed * cfg.dt))
            .ceil()
            .to_usize()
            .unwrap_or(1)
            .max(1),
    };
    let lap_seed = derive_seed(seed, 0x1a);
    let mut data = base.clone();
    let mut controller = train_regression(&data, &hash, &cfg.train)?;
    let mut iterations = Vec::new();
    for it in 0..=cfg.iterations {
        let report = run_lap_experiment(
            &mut controller,
            env,
            traj_id,
            &cfg.supervisor,
            &cfg.laps,
            lap_seed,
        )?;
        iterations.push(DaggerIteration {
            iteration: it,
            dataset_size: data.len(),
            interventions: report.log.interventions.len(),
            pa: report.pa,
        });
        if it == cfg.iterations {
            break;
        }
        let round = dagger_iterate(
            &mut controller,
            env,
            traj_id,
            &data,
            ticks,
            it as u32 + 1,
            cfg.dt,
            &cfg.expert,
            None,
            derive_seed(seed, 0xda00 + it as u64),
        )?;
        data = round.dataset;
        controller = train_regression(&data, &hash, &cfg.train)?;
    }
    Ok(DaggerStudy {
        trajectory: traj_id,
        iterations,
        controller,
        dataset: data,
    })
}
