use serde::{Deserialize, Serialize};

use crate::error::{Result, TngError};
use crate::eval::episode::{Episode, EpisodeLog, Outcome};
use crate::eval::supervisor::SupervisorConfig;
use crate::policy::Policy;
use crate::scalar::Scalar;
use crate::sim::{Environment, TrajectoryId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct LapConfig<T> {
    pub laps: usize,
    pub dt: T,
    /// Step budget as a multiple of the nominal lap time at cruise speed.
    pub budget_factor: T,
    pub record_ticks: bool,
}

impl<T: Scalar> Default for LapConfig<T> {
    fn default() -> Self {
        Self {
            laps: 10,
            dt: T::lit(0.1),
            budget_factor: T::lit(3.0),
            record_ticks: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LapReport<T> {
    pub trajectory: TrajectoryId,
    pub laps_requested: usize,
    pub laps_completed: usize,
    /// Set when the step budget ran out first.
    pub partial: bool,
    pub pa: T,
    pub log: EpisodeLog<T>,
}

/// Drives `policy` around a closed trajectory under supervision until
/// `cfg.laps` laps are complete or the step budget runs out.
pub fn run_lap_experiment<T: Scalar, P: Policy<T> + ?Sized>(
    policy: &mut P,
    env: &Environment<T>,
    traj_id: TrajectoryId,
    sup: &SupervisorConfig<T>,
    cfg: &LapConfig<T>,
    seed: u64,
) -> Result<LapReport<T>> {
    let traj = env
        .trajectory(traj_id)
        .ok_or_else(|| TngError::InvalidInput(format!("unknown trajectory {traj_id}")))?;
    if !traj.closed {
        return Err(TngError::InvalidInput(format!(
            "lap experiments need a closed trajectory, {} is open",
            traj.name
        )));
    }
    if cfg.laps == 0 {
        return Err(TngError::InvalidInput("laps must be at least 1".into()));
    }
    let start = traj.pose_at(T::zero());
    let mut ep = Episode::new(env, start, traj, *sup, cfg.dt, seed)?;
    ep.record_ticks = cfg.record_ticks;
    let nominal =
        traj.length() * T::from_usize_lossy(cfg.laps) / (sup.recovery.cruise_speed * cfg.dt);
    let budget = (nominal * cfg.budget_factor)
        .to_usize()
        .unwrap_or(usize::MAX)
        + 100;
    let target = traj.length() * T::from_usize_lossy(cfg.laps);
    policy.reset();
    let mut outcome = Outcome::Failed("step budget exhausted".into());
    for _ in 0..budget {
        let obs = ep.observe();
        let pose = ep.pose();
        let action = policy.act(&obs, &pose, cfg.dt)?;
        match ep.tick(traj, action, "following") {
            Ok(progress) if progress >= target => {
                outcome = Outcome::Done;
                break;
            }
            Ok(_) => {}
            Err(TngError::ExpertLost { .. }) => {
                outcome = Outcome::Failed("expert lost during recovery".into());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let laps_completed = ep.tracker.laps(traj).min(cfg.laps);
    let log = ep.finish(outcome);
    Ok(LapReport {
        trajectory: traj_id,
        laps_requested: cfg.laps,
        laps_completed,
        partial: !log.outcome.is_done(),
        pa: log.percentage_autonomy()?,
        log,
    })
}
