//! Deterministic planar world: unicycle kinematics, directed trajectories and
//! their crossings, and the synthetic observation encoder.

pub mod environment;
pub mod featurizer;
pub mod pose;
pub mod progress;
pub mod trajectory;
pub mod world;

pub use environment::{Environment, EnvironmentSpec, Intersection, TrajectorySpec};
pub use featurizer::{derive_seed, Bounds, FeaturizerConfig, Landmark, NoiseStream, Observation};
pub use pose::{step_unicycle, MotorCommand, Pose, COMMAND_LIMIT};
pub use progress::ProgressTracker;
pub use trajectory::{CrossTrack, Trajectory, TrajectoryId};
pub use world::WorldState;
