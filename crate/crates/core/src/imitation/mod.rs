//! Behaviour cloning from a scripted expert: demonstrations, shift
//! augmentation, ridge-regression controllers and dataset aggregation.

pub mod augment;
pub mod collect;
pub mod dagger;
pub mod dataset;
pub mod expert;
pub mod regression;
pub mod ridge;

pub use augment::{augment_dataset, augment_shift, junction_entries, AugmentConfig, Augmented};
pub use collect::{collect_demonstrations, Collection};
pub use dagger::{dagger_iterate, DaggerRound};
pub use dataset::{Dataset, DemoSample, Source};
pub use expert::{expert_command, ExpertConfig, ExpertPolicy};
pub use regression::{
    regression_act, train_regression, Head, HeadKind, Optimizer, RegressionController, TrainConfig,
};
