//! Recovery-teaching augmentation: re-observe from a laterally shifted and
//! yawed pose and relabel with the expert. Feature noise and random feature
//! masking play the part of photometric and cut-out image augmentation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TngError};
use crate::imitation::dataset::{Dataset, DemoSample, Source};
use crate::imitation::expert::{expert_command, ExpertConfig};
use crate::scalar::Scalar;
use crate::sim::{Environment, NoiseStream, Pose, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct AugmentConfig<T> {
    /// Shifted copies generated per source sample.
    pub copies: usize,
    pub max_lateral: T,
    pub max_rotational: T,
    /// Standard deviation of extra Gaussian feature noise on augmented samples.
    pub feature_noise: T,
    /// Probability that any one feature of an augmented sample is zeroed.
    pub mask_prob: T,
}

impl<T: Scalar> Default for AugmentConfig<T> {
    fn default() -> Self {
        Self {
            copies: 6,
            max_lateral: T::lit(0.5),
            max_rotational: T::lit(0.4),
            feature_noise: T::zero(),
            mask_prob: T::zero(),
        }
    }
}

/// Shift bounds accepted by [`augment_shift`].
pub const MAX_LATERAL_SHIFT: f64 = 0.5;
pub const MAX_ROTATIONAL_SHIFT: f64 = 0.4;

/// Re-observes `sample` from its pose displaced `lateral` metres to the left and
/// yawed `rotational` radians, labelled with the expert command there. `None`
/// when the displaced pose leaves the arena or the expert cannot drive from it.
pub fn augment_shift<T: Scalar>(
    sample: &DemoSample<T>,
    lateral: T,
    rotational: T,
    env: &Environment<T>,
    traj: &Trajectory<T>,
    expert: &ExpertConfig<T>,
    stream: &mut NoiseStream,
) -> Result<Option<DemoSample<T>>> {
    if lateral.abs() > T::lit(MAX_LATERAL_SHIFT) || rotational.abs() > T::lit(MAX_ROTATIONAL_SHIFT)
    {
        return Err(TngError::InvalidInput(format!(
            "shift ({lateral}, {rotational}) outside ±{MAX_LATERAL_SHIFT} m / ±{MAX_ROTATIONAL_SHIFT} rad"
        )));
    }
    let pose = sample.pose.shifted(lateral, rotational);
    Ok(relabel_at(pose, sample, env, traj, expert, stream))
}

fn relabel_at<T: Scalar>(
    pose: Pose<T>,
    sample: &DemoSample<T>,
    env: &Environment<T>,
    traj: &Trajectory<T>,
    expert: &ExpertConfig<T>,
    stream: &mut NoiseStream,
) -> Option<DemoSample<T>> {
    if !env.in_bounds(&pose) {
        return None;
    }
    let command = expert_command(&pose, traj, expert).ok()?;
    let mut observation = env.observe(&pose, stream);
    observation.timestamp = sample.observation.timestamp;
    Some(DemoSample {
        observation,
        command,
        pose,
        trajectory_id: sample.trajectory_id,
    })
}

/// Summary of an augmentation pass.
#[derive(Debug, Clone)]
pub struct Augmented<T> {
    pub dataset: Dataset<T>,
    pub skipped: usize,
}

/// Generates `cfg.copies` random shifts of every sample in `base`, each
/// relabelled by the expert, then applies feature noise and masking.
pub fn augment_dataset<T: Scalar>(
    base: &Dataset<T>,
    env: &Environment<T>,
    traj: &Trajectory<T>,
    expert: &ExpertConfig<T>,
    cfg: &AugmentConfig<T>,
    seed: u64,
) -> Result<Augmented<T>> {
    let lat = cfg
        .max_lateral
        .min(T::lit(MAX_LATERAL_SHIFT))
        .to_f64_lossy();
    let rot = cfg
        .max_rotational
        .min(T::lit(MAX_ROTATIONAL_SHIFT))
        .to_f64_lossy();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stream = NoiseStream::new(seed ^ 0xa06_3e17);
    let mut out = Augmented {
        dataset: Dataset::new(),
        skipped: 0,
    };
    for sample in base.samples() {
        for _ in 0..cfg.copies {
            let l = T::lit(if lat > 0.0 {
                rng.random_range(-lat..=lat)
            } else {
                0.0
            });
            let r = T::lit(if rot > 0.0 {
                rng.random_range(-rot..=rot)
            } else {
                0.0
            });
            match augment_shift(sample, l, r, env, traj, expert, &mut stream)? {
                Some(mut s) => {
                    perturb_features(&mut s.observation.features, cfg, &mut rng, &mut stream);
                    out.dataset.push(s, Source::Augmentation);
                }
                None => out.skipped += 1,
            }
        }
    }
    Ok(out)
}

fn perturb_features<T: Scalar>(
    features: &mut [T],
    cfg: &AugmentConfig<T>,
    rng: &mut ChaCha8Rng,
    stream: &mut NoiseStream,
) {
    let mask = cfg.mask_prob.to_f64_lossy();
    for f in features.iter_mut() {
        if cfg.feature_noise > T::zero() {
            *f = *f + cfg.feature_noise * stream.gaussian::<T>();
        }
        if mask > 0.0 && rng.random_bool(mask.min(1.0)) {
            *f = T::zero();
        }
    }
}

/// Expert demonstrations starting where the robot joins `traj` from another
/// trajectory: for every crossing onto `traj` and every arc offset in
/// `offsets`, the expert drives `duration` seconds from the incoming
/// trajectory's pose that far past the crossing point.
pub fn junction_entries<T: Scalar>(
    env: &Environment<T>,
    traj: &Trajectory<T>,
    expert: &ExpertConfig<T>,
    dt: T,
    duration: T,
    offsets: &[T],
    seed: u64,
) -> Result<Dataset<T>> {
    let mut out = Dataset::new();
    let mut stream = NoiseStream::new(seed);
    let steps = (duration / dt).ceil().to_usize().unwrap_or(0);
    for x in env
        .intersections
        .iter()
        .filter(|x| x.to_trajectory == traj.id)
    {
        let from = env
            .trajectory(x.from_trajectory)
            .expect("intersections reference known trajectories");
        for &o in offsets {
            let mut pose = from.pose_at(x.from_arc + o);
            for _ in 0..steps {
                let Ok(command) = expert_command(&pose, traj, expert) else {
                    break;
                };
                if !env.in_bounds(&pose) {
                    break;
                }
                out.push(
                    DemoSample {
                        observation: env.observe(&pose, &mut stream),
                        command,
                        pose,
                        trajectory_id: traj.id,
                    },
                    Source::Augmentation,
                );
                pose = crate::sim::step_unicycle(pose, command, dt)?;
            }
        }
    }
    Ok(out)
}
