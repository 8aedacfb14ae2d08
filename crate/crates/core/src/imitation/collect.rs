use crate::error::{Result, TngError};
use crate::imitation::dataset::{Dataset, DemoSample, Source};
use crate::imitation::expert::{expert_command, ExpertConfig};
use crate::scalar::Scalar;
use crate::sim::progress::ProgressTracker;
use crate::sim::{Environment, Pose, TrajectoryId, WorldState};

/// Expert demonstration run on one trajectory.
#[derive(Debug, Clone)]
pub struct Collection<T> {
    pub dataset: Dataset<T>,
    /// Sample count at the end of each completed lap.
    pub lap_ends: Vec<usize>,
    /// Robot pose at the end of each completed lap.
    pub lap_end_poses: Vec<Pose<T>>,
    /// Set when the expert lost the path and the run stopped early.
    pub aborted: Option<String>,
}

/// Drives the expert for `laps` completions of trajectory `traj_id`, recording
/// `(observation, command, pose)` every tick. Closed trajectories are driven
/// continuously; open ones restart from their first waypoint after every pass.
pub fn collect_demonstrations<T: Scalar>(
    env: &Environment<T>,
    traj_id: TrajectoryId,
    laps: usize,
    dt: T,
    cfg: &ExpertConfig<T>,
    seed: u64,
) -> Result<Collection<T>> {
    if laps == 0 {
        return Err(TngError::InvalidInput("laps must be at least 1".into()));
    }
    if !(dt > T::zero()) {
        return Err(TngError::InvalidInput("dt must be positive".into()));
    }
    cfg.validate()?;
    let traj = env
        .trajectory(traj_id)
        .ok_or_else(|| TngError::InvalidInput(format!("unknown trajectory {traj_id}")))?;
    let start = traj.pose_at(T::zero());
    let mut world = WorldState::new(start, seed);
    let mut tracker = ProgressTracker::new(traj, &start);
    let per_lap = (traj.length() / (cfg.cruise_speed * dt)).to_f64_lossy();
    let budget = (3.0 * per_lap * laps as f64) as usize + 100;
    let mut out = Collection {
        dataset: Dataset::new(),
        lap_ends: Vec::new(),
        lap_end_poses: Vec::new(),
        aborted: None,
    };
    // open trajectories: the pass ends within one step of the final waypoint
    let end_margin = cfg.cruise_speed * dt;
    for _ in 0..budget {
        let obs = world.observe(env);
        let cmd = match expert_command(&world.pose, traj, cfg) {
            Ok(c) => c,
            Err(e) => {
                out.aborted = Some(e.to_string());
                break;
            }
        };
        out.dataset.push(
            DemoSample {
                observation: obs,
                command: cmd,
                pose: world.pose,
                trajectory_id: traj_id,
            },
            Source::ExpertLap,
        );
        world.step(cmd, dt)?;
        let progress = tracker.update(traj, &world.pose);
        let done = if traj.closed {
            tracker.laps(traj) > out.lap_ends.len()
        } else {
            progress >= traj.length() - end_margin
        };
        if done {
            out.lap_ends.push(out.dataset.len());
            out.lap_end_poses.push(world.pose);
            if out.lap_ends.len() == laps {
                break;
            }
            if !traj.closed {
                world.pose = start;
                tracker = ProgressTracker::new(traj, &start);
            }
        }
    }
    if out.lap_ends.len() < laps && out.aborted.is_none() {
        out.aborted = Some(format!(
            "step budget exhausted after {} of {laps} laps",
            out.lap_ends.len()
        ));
    }
    Ok(out)
}
