use crate::error::Result;
use crate::scalar::Scalar;
use crate::sim::{MotorCommand, Observation, Pose};

/// What a controller emits on one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action<T> {
    Command(MotorCommand<T>),
    /// No confident output this tick; the robot receives a zero command.
    Abstain,
}

impl<T: Scalar> Action<T> {
    pub fn command(&self) -> MotorCommand<T> {
        match self {
            Action::Command(c) => *c,
            Action::Abstain => MotorCommand::zero(),
        }
    }

    pub fn is_abstain(&self) -> bool {
        matches!(self, Action::Abstain)
    }
}

/// A closed-loop controller. Learned controllers read only the observation;
/// the true pose is passed for scripted experts and oracles.
pub trait Policy<T: Scalar> {
    fn act(&mut self, obs: &Observation<T>, pose: &Pose<T>, dt: T) -> Result<Action<T>>;

    /// Clears internal state (integrators, filters) before a fresh engagement.
    fn reset(&mut self) {}
}

impl<T: Scalar, P: Policy<T> + ?Sized> Policy<T> for Box<P> {
    fn act(&mut self, obs: &Observation<T>, pose: &Pose<T>, dt: T) -> Result<Action<T>> {
        (**self).act(obs, pose, dt)
    }

    fn reset(&mut self) {
        (**self).reset()
    }
}

/// Adapts a closure into a [`Policy`]; handy for scripted test drivers.
pub struct FnPolicy<F>(pub F);

impl<T, F> Policy<T> for FnPolicy<F>
where
    T: Scalar,
    F: FnMut(&Observation<T>, &Pose<T>, T) -> Result<Action<T>>,
{
    fn act(&mut self, obs: &Observation<T>, pose: &Pose<T>, dt: T) -> Result<Action<T>> {
        (self.0)(obs, pose, dt)
    }
}
