//! Topological navigation graphs over learned trajectory-following
//! controllers, in a deterministic 2D unicycle world.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision for callers that do not care.

pub mod bundled;
pub mod detection;
pub mod error;
pub mod eval;
pub mod imitation;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod policy;
pub mod scalar;
pub mod sim;
pub mod tng;

pub use error::{Result, TngError};
pub use scalar::Scalar;

pub type Environment = sim::Environment<f64>;
pub type EnvironmentSpec = sim::EnvironmentSpec<f64>;
pub type Observation = sim::Observation<f64>;
pub type Pose = sim::Pose<f64>;
pub type Dataset = imitation::Dataset<f64>;
pub type RegressionController = imitation::RegressionController<f64>;
pub type DetectionController = detection::DetectionController<f64>;
pub type TrajectoryClassifier = tng::TrajectoryClassifier<f64>;
pub type TngGraph = tng::TngGraph<f64>;
pub type Model = model::Model<f64>;
pub type EpisodeLog = eval::EpisodeLog<f64>;
pub type MatrixReport = eval::MatrixReport<f64>;
pub type Report = eval::Report<f64>;

/// Single-precision aliases.
pub mod f32 {
    pub type Environment = crate::sim::Environment<f32>;
    pub type EnvironmentSpec = crate::sim::EnvironmentSpec<f32>;
    pub type Observation = crate::sim::Observation<f32>;
    pub type Pose = crate::sim::Pose<f32>;
    pub type Dataset = crate::imitation::Dataset<f32>;
    pub type RegressionController = crate::imitation::RegressionController<f32>;
    pub type DetectionController = crate::detection::DetectionController<f32>;
    pub type TrajectoryClassifier = crate::tng::TrajectoryClassifier<f32>;
    pub type TngGraph = crate::tng::TngGraph<f32>;
    pub type Model = crate::model::Model<f32>;
    pub type EpisodeLog = crate::eval::EpisodeLog<f32>;
    pub type MatrixReport = crate::eval::MatrixReport<f32>;
    pub type Report = crate::eval::Report<f32>;
}
