use serde::{Deserialize, Serialize};

use crate::error::{Result, TngError};
use crate::eval::supervisor::{Supervisor, SupervisorConfig, SupervisorPhase, Trigger};
use crate::imitation::expert_command;
use crate::policy::Action;
use crate::scalar::Scalar;
use crate::sim::{
    Environment, MotorCommand, Observation, Pose, ProgressTracker, Trajectory, WorldState,
};

pub const EPISODE_FORMAT: &str = "tng-episode/1";

/// `100 (1 - tau_h / tau)`.
pub fn percentage_autonomy<T: Scalar>(human_time: T, total_time: T) -> Result<T> {
    if !(total_time > T::zero()) {
        return Err(TngError::ZeroDuration);
    }
    if !(human_time >= T::zero()) || human_time > total_time {
        return Err(TngError::InvalidInput(format!(
            "human time {human_time} outside [0, {total_time}]"
        )));
    }
    Ok(T::lit(100.0) * (T::one() - human_time / total_time))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Intervention<T> {
    pub start: T,
    pub end: T,
    pub trigger: Trigger,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SwitchEvent<T> {
    pub t: T,
    pub from: usize,
    pub to: usize,
    pub pose: Pose<T>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status", content = "reason")]
pub enum Outcome {
    Done,
    Failed(String),
}

impl Outcome {
    pub fn is_done(&self) -> bool {
        matches!(self, Outcome::Done)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TickRecord<T> {
    pub t: T,
    pub pose: Pose<T>,
    pub command: MotorCommand<T>,
    pub phase: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EpisodeLog<T> {
    pub format: String,
    pub total_time: T,
    pub human_time: T,
    pub distance: T,
    pub interventions: Vec<Intervention<T>>,
    pub switches: Vec<SwitchEvent<T>>,
    pub abstentions: usize,
    pub outcome: Outcome,
    /// Pose when the episode ended.
    #[serde(default)]
    pub final_pose: Pose<T>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ticks: Vec<TickRecord<T>>,
}

impl<T: Scalar> EpisodeLog<T> {
    pub fn new() -> Self {
        Self {
            format: EPISODE_FORMAT.into(),
            total_time: T::zero(),
            human_time: T::zero(),
            distance: T::zero(),
            interventions: Vec::new(),
            switches: Vec::new(),
            abstentions: 0,
            outcome: Outcome::Done,
            final_pose: Pose::default(),
            ticks: Vec::new(),
        }
    }

    pub fn percentage_autonomy(&self) -> Result<T> {
        percentage_autonomy(self.human_time, self.total_time)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("episode log serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let log: Self = serde_json::from_str(text).map_err(|e| TngError::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        if log.format != EPISODE_FORMAT {
            return Err(TngError::Validation(format!(
                "expected format {EPISODE_FORMAT}, got {}",
                log.format
            )));
        }
        Ok(log)
    }
}

impl<T: Scalar> Default for EpisodeLog<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// A world advanced tick by tick under geometric supervision, with
/// time, human-time and distance accounting.
#[derive(Debug, Clone)]
pub struct Episode<'a, T> {
    pub env: &'a Environment<T>,
    pub world: WorldState<T>,
    pub supervisor: Supervisor<T>,
    pub tracker: ProgressTracker<T>,
    pub log: EpisodeLog<T>,
    pub dt: T,
    pub record_ticks: bool,
    pending_events: Vec<String>,
}

impl<'a, T: Scalar> Episode<'a, T> {
    pub fn new(
        env: &'a Environment<T>,
        start: Pose<T>,
        traj: &Trajectory<T>,
        cfg: SupervisorConfig<T>,
        dt: T,
        seed: u64,
    ) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(TngError::InvalidInput("dt must be > 0".into()));
        }
        Ok(Self {
            env,
            world: WorldState::new(start, seed),
            supervisor: Supervisor::new(cfg)?,
            tracker: ProgressTracker::new(traj, &start),
            log: EpisodeLog::new(),
            dt,
            record_ticks: false,
            pending_events: Vec::new(),
        })
    }

    pub fn observe(&mut self) -> Observation<T> {
        self.world.observe(self.env)
    }

    pub fn time(&self) -> T {
        self.world.time
    }

    pub fn pose(&self) -> Pose<T> {
        self.world.pose
    }

    pub fn note(&mut self, event: impl Into<String>) {
        self.pending_events.push(event.into());
    }

    /// Changes the trajectory the supervisor measures against.
    pub fn retarget(&mut self, traj: &Trajectory<T>) {
        self.tracker = ProgressTracker::new(traj, &self.world.pose);
        self.supervisor.retarget(self.world.time, T::zero());
    }

    /// Applies the controller's action for one tick unless the supervisor
    /// takes over, in which case the recovery expert drives. Returns the
    /// forward progress along `traj` after the tick.
    pub fn tick(&mut self, traj: &Trajectory<T>, action: Action<T>, phase: &str) -> Result<T> {
        let t = self.world.time;
        let (sup, ended) = self
            .supervisor
            .step(t, &self.world.pose, traj, self.tracker.progress());
        if let Some((start, end, trigger)) = ended {
            self.log.interventions.push(Intervention {
                start,
                end,
                trigger,
            });
        }
        if action.is_abstain() {
            self.log.abstentions += 1;
            self.pending_events.push("abstain".into());
        }
        let command = match sup {
            SupervisorPhase::Nominal => {
                let c = action.command();
                self.log.distance = self.log.distance + c.linear.abs() * self.dt;
                c
            }
            SupervisorPhase::Intervening => {
                self.log.human_time = self.log.human_time + self.dt;
                expert_command(&self.world.pose, traj, &self.supervisor.cfg.recovery)?
            }
        };
        if self.record_ticks {
            self.log.ticks.push(TickRecord {
                t,
                pose: self.world.pose,
                command,
                phase: if sup == SupervisorPhase::Intervening {
                    format!("{phase}/intervening")
                } else {
                    phase.to_string()
                },
                events: std::mem::take(&mut self.pending_events),
            });
        } else {
            self.pending_events.clear();
        }
        self.world.step(command, self.dt)?;
        self.log.total_time = self.log.total_time + self.dt;
        Ok(self.tracker.update(traj, &self.world.pose))
    }

    /// Closes any open intervention and returns the log.
    pub fn finish(mut self, outcome: Outcome) -> EpisodeLog<T> {
        if let Some((start, trigger)) = self.supervisor.active() {
            self.log.interventions.push(Intervention {
                start,
                end: self.world.time,
                trigger,
            });
        }
        self.log.outcome = outcome;
        self.log.final_pose = self.world.pose;
        self.log
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pa_examples() {
        assert_eq!(percentage_autonomy(0.0, 100.0).unwrap(), 100.0);
        assert_eq!(percentage_autonomy(100.0, 100.0).unwrap(), 0.0);
        assert!((percentage_autonomy(3.7f64, 100.0).unwrap() - 96.3).abs() < 1e-12);
        assert!(matches!(
            percentage_autonomy(0.0, 0.0),
            Err(TngError::ZeroDuration)
        ));
        assert!(percentage_autonomy(2.0, 1.0).is_err());
    }

    #[test]
    fn log_round_trip() {
        let mut log = EpisodeLog::<f64>::new();
        log.total_time = 3.0;
        log.outcome = Outcome::Failed("timeout".into());
        log.interventions.push(Intervention {
            start: 0.5,
            end: 1.0,
            trigger: Trigger::Stall,
        });
        let back = EpisodeLog::from_json(&log.to_json()).unwrap();
        assert_eq!(back, log);
    }
}
