//! Supervised evaluation: percentage autonomy, lap experiments, the
//! navigation matrix and environment-drift studies.

pub mod dagger_study;
pub mod episode;
pub mod laps;
pub mod navigation;
pub mod perturb;
pub mod report;
pub mod supervisor;

pub use dagger_study::{run_dagger_study, DaggerConfig, DaggerIteration, DaggerStudy};
pub use episode::{
    percentage_autonomy, Episode, EpisodeLog, Intervention, Outcome, SwitchEvent, TickRecord,
};
pub use laps::{run_lap_experiment, LapConfig, LapReport};
pub use navigation::{
    assemble_matrix, cell_seed, run_navigation, run_navigation_matrix, CellReport, MatrixReport,
    NavigationConfig,
};
pub use perturb::{
    perturb_environment, run_degradation_study, DegradationConfig, DegradationReport,
    DegradationRow,
};
pub use report::{
    matrix_rows, to_csv, LapSummary, MatrixSummary, Report, RunRow, CSV_HEADER, REPORT_FORMAT,
};
pub use supervisor::{Supervisor, SupervisorConfig, SupervisorPhase, Trigger};
