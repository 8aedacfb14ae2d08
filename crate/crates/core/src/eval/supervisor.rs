use serde::{Deserialize, Serialize};

use crate::error::{Result, TngError};
use crate::imitation::ExpertConfig;
use crate::scalar::Scalar;
use crate::sim::{Pose, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct SupervisorConfig<T> {
    pub max_cross_track: T,
    pub max_heading_error: T,
    /// How long a bound violation must persist before taking over.
    pub grace: T,
    pub recover_to: T,
    /// Heading error the recovery must also reach before handing back.
    pub recover_heading: T,
    /// Forward progress below `stall_progress` over this long also triggers.
    pub stall_window: T,
    pub stall_progress: T,
    pub recovery: ExpertConfig<T>,
}

impl<T: Scalar> Default for SupervisorConfig<T> {
    fn default() -> Self {
        Self {
            max_cross_track: T::lit(0.75),
            max_heading_error: T::lit(1.2),
            grace: T::lit(1.0),
            recover_to: T::lit(0.1),
            recover_heading: T::lit(0.2),
            stall_window: T::lit(5.0),
            stall_progress: T::lit(0.25),
            recovery: ExpertConfig::default(),
        }
    }
}

impl<T: Scalar> SupervisorConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.recover_to < self.max_cross_track) || !(self.recover_to >= T::zero()) {
            return Err(TngError::InvalidInput(
                "recover_to must lie in [0, max_cross_track)".into(),
            ));
        }
        if !(self.grace >= T::zero()) {
            return Err(TngError::InvalidInput("grace must be >= 0".into()));
        }
        if !(self.max_heading_error > T::zero()) || !(self.recover_heading > T::zero()) {
            return Err(TngError::InvalidInput("heading bounds must be > 0".into()));
        }
        if !(self.stall_window > T::zero()) || !(self.stall_progress >= T::zero()) {
            return Err(TngError::InvalidInput("stall window must be > 0".into()));
        }
        self.recovery.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trigger {
    MaxCrossTrack,
    MaxHeadingError,
    Stall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupervisorPhase {
    Nominal,
    Intervening,
}

/// Geometric stand-in for a human watching the robot.
#[derive(Debug, Clone)]
pub struct Supervisor<T> {
    pub cfg: SupervisorConfig<T>,
    phase: SupervisorPhase,
    violation: Option<(T, Trigger)>,
    active: Option<(T, Trigger, T)>,
    stall_anchor: (T, T),
}

impl<T: Scalar> Supervisor<T> {
    pub fn new(cfg: SupervisorConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            phase: SupervisorPhase::Nominal,
            violation: None,
            active: None,
            stall_anchor: (T::zero(), T::zero()),
        })
    }

    pub fn phase(&self) -> SupervisorPhase {
        self.phase
    }

    /// Start time and trigger of the intervention in progress.
    pub fn active(&self) -> Option<(T, Trigger)> {
        self.active.map(|(s, t, _)| (s, t))
    }

    /// Restarts stall and violation tracking, e.g. after the reference
    /// trajectory changes; `progress` is the new tracker's reading.
    pub fn retarget(&mut self, t: T, progress: T) {
        self.violation = None;
        self.stall_anchor = (t, progress);
        if let Some(a) = self.active.as_mut() {
            a.2 = progress;
        }
    }

    /// Decides who drives during the tick starting at `t`. Returns the phase
    /// and, when an intervention just ended, its `(start, end, trigger)`.
    pub fn step(
        &mut self,
        t: T,
        pose: &Pose<T>,
        traj: &Trajectory<T>,
        progress: T,
    ) -> (SupervisorPhase, Option<(T, T, Trigger)>) {
        let ct = traj.cross_track(pose);
        let mut ended = None;
        if let Some((start, trigger, p0)) = self.active {
            let settled = ct.distance <= self.cfg.recover_to
                && ct.heading_error.abs() <= self.cfg.recover_heading
                && (trigger != Trigger::Stall || progress - p0 >= self.cfg.stall_progress);
            if settled {
                ended = Some((start, t, trigger));
                self.active = None;
                self.phase = SupervisorPhase::Nominal;
                self.violation = None;
                self.stall_anchor = (t, progress);
            } else {
                return (SupervisorPhase::Intervening, None);
            }
        }
        let bound = if ct.distance > self.cfg.max_cross_track {
            Some(Trigger::MaxCrossTrack)
        } else if ct.heading_error.abs() > self.cfg.max_heading_error {
            Some(Trigger::MaxHeadingError)
        } else {
            None
        };
        self.violation = match (bound, self.violation) {
            (None, _) => None,
            (Some(b), None) => Some((t, b)),
            (Some(_), v) => v,
        };
        if progress - self.stall_anchor.1 >= self.cfg.stall_progress {
            self.stall_anchor = (t, progress);
        }
        // the clock is a running sum of ticks
        let eps = T::lit(1e-9);
        let trigger = match self.violation {
            Some((since, b)) if t - since + eps >= self.cfg.grace => Some(b),
            _ if t - self.stall_anchor.0 + eps >= self.cfg.stall_window => Some(Trigger::Stall),
            _ => None,
        };
        if let Some(trigger) = trigger {
            self.active = Some((t, trigger, progress));
            self.phase = SupervisorPhase::Intervening;
            self.violation = None;
        }
        (self.phase, ended)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Trajectory<f64> {
        Trajectory::new(0, "l", false, vec![[0.0, 0.0], [50.0, 0.0], [100.0, 0.0]]).unwrap()
    }

    #[test]
    fn waits_for_grace() {
        let mut s = Supervisor::new(SupervisorConfig::default()).unwrap();
        let off = Pose::new(1.0, 1.0, 0.0);
        let mut t = 0.0;
        let mut first = None;
        for k in 0..20 {
            let (p, _) = s.step(t, &off, &line(), 0.05 * k as f64);
            if p == SupervisorPhase::Intervening && first.is_none() {
                first = Some(t);
            }
            t += 0.1;
        }
        let f = first.unwrap();
        assert!((f - 1.0).abs() < 1e-9, "{f}");
        assert_eq!(s.active().unwrap().1, Trigger::MaxCrossTrack);
        let (p, ended) = s.step(t, &Pose::new(5.0, 0.05, 0.0), &line(), 2.0);
        assert_eq!(p, SupervisorPhase::Nominal);
        assert_eq!(ended.unwrap().2, Trigger::MaxCrossTrack);
    }

    #[test]
    fn stall_fires_without_progress() {
        let mut s = Supervisor::new(SupervisorConfig::default()).unwrap();
        let on = Pose::new(1.0, 0.0, 0.0);
        let mut hit = false;
        for k in 0..60 {
            let (p, _) = s.step(k as f64 * 0.1, &on, &line(), 0.0);
            hit |= p == SupervisorPhase::Intervening;
        }
        assert!(hit);
        assert_eq!(s.active().unwrap().1, Trigger::Stall);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SupervisorConfig {
            recover_to: 1.0,
            ..SupervisorConfig::<f64>::default()
        };
        assert!(Supervisor::new(cfg).is_err());
    }
}
