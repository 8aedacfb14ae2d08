use crate::error::{Result, TngError};
use crate::imitation::dataset::{Dataset, DemoSample, Source};
use crate::imitation::expert::{expert_command, ExpertConfig};
use crate::policy::Policy;
use crate::scalar::Scalar;
use crate::sim::{Environment, Pose, TrajectoryId, WorldState};

/// Result of one aggregation round.
#[derive(Debug, Clone)]
pub struct DaggerRound<T> {
    /// `base` followed by the newly labelled rollout samples.
    pub dataset: Dataset<T>,
    pub added: usize,
    pub expert_lost: usize,
    /// Set when the rollout left the arena before `steps` ticks.
    pub truncated_at: Option<usize>,
}

/// Rolls out the learner for `steps` ticks from `start` (the trajectory's first
/// pose when `None`), labels every visited observation with the expert and
/// appends the pairs to `base` under `Source::Dagger(iteration)`. Retraining is
/// left to the caller.
#[allow(clippy::too_many_arguments)]
pub fn dagger_iterate<T: Scalar, P: Policy<T> + ?Sized>(
    learner: &mut P,
    env: &Environment<T>,
    traj_id: TrajectoryId,
    base: &Dataset<T>,
    steps: usize,
    iteration: u32,
    dt: T,
    cfg: &ExpertConfig<T>,
    start: Option<Pose<T>>,
    seed: u64,
) -> Result<DaggerRound<T>> {
    if steps == 0 {
        return Err(TngError::InvalidInput(
            "DAgger rollout needs at least one step".into(),
        ));
    }
    let traj = env
        .trajectory(traj_id)
        .ok_or_else(|| TngError::InvalidInput(format!("unknown trajectory {traj_id}")))?;
    let mut world = WorldState::new(start.unwrap_or_else(|| traj.pose_at(T::zero())), seed);
    let mut round = DaggerRound {
        dataset: base.clone(),
        added: 0,
        expert_lost: 0,
        truncated_at: None,
    };
    learner.reset();
    for step in 0..steps {
        if !env.in_bounds(&world.pose) {
            round.truncated_at = Some(step);
            break;
        }
        let obs = world.observe(env);
        let action = learner.act(&obs, &world.pose, dt)?;
        match expert_command(&world.pose, traj, cfg) {
            Ok(label) => {
                round.dataset.push(
                    DemoSample {
                        observation: obs,
                        command: label,
                        pose: world.pose,
                        trajectory_id: traj_id,
                    },
                    Source::Dagger(iteration),
                );
                round.added += 1;
            }
            Err(TngError::ExpertLost { .. }) => round.expert_lost += 1,
            Err(e) => return Err(e),
        }
        world.step(action.command(), dt)?;
    }
    Ok(round)
}
