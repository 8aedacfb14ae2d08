use serde::{Deserialize, Serialize};

use crate::error::{Result, TngError};
use crate::scalar::{wrap_angle, Scalar};

/// Magnitude bound applied to both command channels by every controller.
pub const COMMAND_LIMIT: f64 = 1.5;

/// Planar robot configuration. `theta` is CCW-positive and kept in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Pose<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Scalar> Pose<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> [T; 2] {
        [self.x, self.y]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// Pose displaced `lateral` metres to the left of its heading and yawed by `rotation`.
    pub fn shifted(&self, lateral: T, rotation: T) -> Self {
        let (s, c) = self.theta.sin_cos();
        Self::new(
            self.x - lateral * s,
            self.y + lateral * c,
            self.theta + rotation,
        )
    }

    pub fn distance_to(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn to_array(&self) -> [T; 3] {
        [self.x, self.y, self.theta]
    }
}

/// Control `(linear m/s, angular rad/s)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MotorCommand<T> {
    pub linear: T,
    pub angular: T,
}

impl<T: Scalar> MotorCommand<T> {
    pub fn new(linear: T, angular: T) -> Self {
        Self { linear, angular }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.linear.is_finite() && self.angular.is_finite()
    }

    /// Both channels clipped to `[-COMMAND_LIMIT, COMMAND_LIMIT]`.
    pub fn clipped(self) -> Self {
        let lim = T::lit(COMMAND_LIMIT);
        Self::new(
            self.linear.clamp_to(-lim, lim),
            self.angular.clamp_to(-lim, lim),
        )
    }

    pub fn within_limit(&self) -> bool {
        let lim = T::lit(COMMAND_LIMIT);
        self.linear.abs() <= lim && self.angular.abs() <= lim
    }

    pub fn to_array(&self) -> [T; 2] {
        [self.linear, self.angular]
    }
}

/// Exact unicycle integration of a constant command over `dt`.
pub fn step_unicycle<T: Scalar>(pose: Pose<T>, cmd: MotorCommand<T>, dt: T) -> Result<Pose<T>> {
    if !pose.is_finite() || !cmd.is_finite() || !dt.is_finite() {
        return Err(TngError::InvalidInput(
            "non-finite pose, command or dt".into(),
        ));
    }
    if dt <= T::zero() {
        return Err(TngError::InvalidInput(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let v = cmd.linear;
    let w = cmd.angular;
    let dtheta = w * dt;
    // below this the arc formula loses precision against the straight-line limit
    if dtheta.abs() < T::lit(1e-9) {
        let (s, c) = (pose.theta + dtheta / T::lit(2.0)).sin_cos();
        return Ok(Pose::new(
            pose.x + v * dt * c,
            pose.y + v * dt * s,
            pose.theta + dtheta,
        ));
    }
    let r = v / w;
    let th1 = pose.theta + dtheta;
    Ok(Pose::new(
        pose.x + r * (th1.sin() - pose.theta.sin()),
        pose.y - r * (th1.cos() - pose.theta.cos()),
        th1,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn straight_line() {
        let p = step_unicycle(Pose::new(0.0, 0.0, 0.0), MotorCommand::new(1.0, 0.0), 1.0).unwrap();
        assert_eq!(p, Pose::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn pure_rotation() {
        let p = step_unicycle(
            Pose::new(0.0, 0.0, 0.0),
            MotorCommand::new(0.0, FRAC_PI_2),
            1.0,
        )
        .unwrap();
        assert!(p.x.abs() < 1e-15 && p.y.abs() < 1e-15);
        assert!((p.theta - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn unit_arc_matches_closed_form() {
        // x = (v/w) sin(wt), y = (v/w)(1 - cos(wt)) with v = w = t = 1
        let p = step_unicycle(Pose::new(0.0, 0.0, 0.0), MotorCommand::new(1.0, 1.0), 1.0).unwrap();
        let (ex, ey) = (1f64.sin(), 1.0 - 1f64.cos());
        assert!((p.x - ex).abs() < 1e-12);
        assert!((p.y - ey).abs() < 1e-12);
        assert!((p.theta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_precision_arc() {
        let p = step_unicycle(
            Pose::new(0.0f32, 0.0, 0.0),
            MotorCommand::new(1.0, 1.0),
            1.0,
        )
        .unwrap();
        assert!((p.x - 1f32.sin()).abs() < 1e-6);
        assert!((p.y - (1.0 - 1f32.cos())).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = Pose::new(0.0, 0.0, 0.0);
        assert!(step_unicycle(p, MotorCommand::new(f64::NAN, 0.0), 0.1).is_err());
        assert!(step_unicycle(p, MotorCommand::new(1.0, 0.0), 0.0).is_err());
        assert!(step_unicycle(p, MotorCommand::new(1.0, 0.0), f64::INFINITY).is_err());
    }

    #[test]
    fn clipping() {
        let c = MotorCommand::new(3.0, -2.0).clipped();
        assert_eq!(c, MotorCommand::new(1.5, -1.5));
    }

    proptest! {
        #[test]
        fn steps_compose(
            x in -5.0f64..5.0, y in -5.0f64..5.0, th in -3.1f64..3.1,
            v in -1.5f64..1.5, w in -1.5f64..1.5, dt in 0.01f64..0.5,
        ) {
            let p = Pose::new(x, y, th);
            let c = MotorCommand::new(v, w);
            let two = step_unicycle(step_unicycle(p, c, dt).unwrap(), c, dt).unwrap();
            let once = step_unicycle(p, c, 2.0 * dt).unwrap();
            prop_assert!((two.x - once.x).abs() < 1e-12);
            prop_assert!((two.y - once.y).abs() < 1e-12);
            prop_assert!(wrap_angle(two.theta - once.theta).abs() < 1e-12);
        }

        #[test]
        fn heading_stays_wrapped(th in -50.0f64..50.0, w in -1.5f64..1.5) {
            let p = step_unicycle(Pose::new(0.0, 0.0, th), MotorCommand::new(0.3, w), 0.7).unwrap();
            prop_assert!(p.theta > -std::f64::consts::PI && p.theta <= std::f64::consts::PI);
        }
    }
}
