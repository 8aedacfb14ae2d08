//! Scripted pure-pursuit driver standing in for the human demonstrator.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TngError};
use crate::policy::{Action, Policy};
use crate::scalar::{wrap_angle, Scalar};
use crate::sim::{MotorCommand, Observation, Pose, Trajectory};

/// The expert refuses to drive from further away than this.
pub const EXPERT_MAX_DISTANCE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct ExpertConfig<T> {
    pub lookahead: T,
    pub cruise_speed: T,
    pub max_angular: T,
}

impl<T: Scalar> Default for ExpertConfig<T> {
    fn default() -> Self {
        Self {
            lookahead: T::lit(0.5),
            cruise_speed: T::lit(0.5),
            max_angular: T::lit(1.5),
        }
    }
}

impl<T: Scalar> ExpertConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.lookahead > T::zero()) || !(self.cruise_speed > T::zero()) {
            return Err(TngError::InvalidInput(
                "expert lookahead and cruise speed must be positive".into(),
            ));
        }
        if !(self.max_angular > T::zero()) {
            return Err(TngError::InvalidInput(
                "expert max_angular must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Bearing, in the robot frame, of the path point `lookahead` metres past the
/// pose's foot point.
pub fn lookahead_bearing<T: Scalar>(pose: &Pose<T>, traj: &Trajectory<T>, lookahead: T) -> T {
    let ct = traj.cross_track(pose);
    let (target, _) = traj.point_at(ct.arc_position + lookahead);
    wrap_angle((target[1] - pose.y).atan2(target[0] - pose.x) - pose.theta)
}

/// Pure pursuit: `angular = 2 v sin(alpha) / L`, clipped; `linear = v`.
pub fn expert_command<T: Scalar>(
    pose: &Pose<T>,
    traj: &Trajectory<T>,
    cfg: &ExpertConfig<T>,
) -> Result<MotorCommand<T>> {
    let ct = traj.cross_track(pose);
    if ct.distance > T::lit(EXPERT_MAX_DISTANCE) {
        return Err(TngError::ExpertLost {
            trajectory: traj.id,
            distance: ct.distance.to_f64_lossy(),
        });
    }
    let alpha = lookahead_bearing(pose, traj, cfg.lookahead);
    let limit = cfg.max_angular;
    let angular =
        (T::lit(2.0) * cfg.cruise_speed * alpha.sin() / cfg.lookahead).clamp_to(-limit, limit);
    Ok(MotorCommand::new(cfg.cruise_speed, angular).clipped())
}

/// The expert as a closed-loop [`Policy`] on one trajectory.
#[derive(Debug, Clone)]
pub struct ExpertPolicy<T> {
    pub trajectory: Trajectory<T>,
    pub config: ExpertConfig<T>,
}

impl<T: Scalar> ExpertPolicy<T> {
    pub fn new(trajectory: Trajectory<T>, config: ExpertConfig<T>) -> Self {
        Self { trajectory, config }
    }
}

impl<T: Scalar> Policy<T> for ExpertPolicy<T> {
    fn act(&mut self, _obs: &Observation<T>, pose: &Pose<T>, _dt: T) -> Result<Action<T>> {
        expert_command(pose, &self.trajectory, &self.config).map(Action::Command)
    }
}
