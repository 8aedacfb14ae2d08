//! The navigation graph: trajectory and place classifiers, planning and the
//! controller-switching executive.

pub mod build;
pub mod classifier;
pub mod executive;
pub mod exemplar;
pub mod graph;

pub use build::{train_system, ControllerKind, PipelineConfig, TrainedSystem};
pub use classifier::{
    classify_trajectory, train_trajectory_classifier, Classification, ClassifierConfig,
    TrajectoryClassifier,
};
pub use executive::{execute, ExecutiveConfig, ExecutivePhase, ExecutiveState};
pub use exemplar::{
    detect_intersection, enroll_goal, enroll_intersection, enroll_places, goal_reached,
    EnrollConfig, ExemplarMatcher, GoalReacher, IntersectionClassifier,
};
pub use graph::{
    edge_weight, identify_goal, localize, plan, plan_edges, Controller, Edge, Localization, Plan,
    Reachability, TngGraph, Vertex, WeightMode, GRAPH_FORMAT,
};
