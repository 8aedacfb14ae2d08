use crate::error::Result;
use crate::scalar::Scalar;
use crate::sim::environment::Environment;
use crate::sim::featurizer::{NoiseStream, Observation};
use crate::sim::pose::{step_unicycle, MotorCommand, Pose};

/// Mutable per-episode state: the robot pose, the clock and the noise stream.
#[derive(Debug, Clone)]
pub struct WorldState<T> {
    pub pose: Pose<T>,
    pub time: T,
    pub stream: NoiseStream,
}

impl<T: Scalar> WorldState<T> {
    pub fn new(pose: Pose<T>, seed: u64) -> Self {
        Self {
            pose,
            time: T::zero(),
            stream: NoiseStream::new(seed),
        }
    }

    pub fn observe(&mut self, env: &Environment<T>) -> Observation<T> {
        let mut obs = env.observe(&self.pose, &mut self.stream);
        obs.timestamp = self.time;
        obs
    }

    pub fn step(&mut self, cmd: MotorCommand<T>, dt: T) -> Result<()> {
        self.pose = step_unicycle(self.pose, cmd, dt)?;
        self.time = self.time + dt;
        Ok(())
    }
}
