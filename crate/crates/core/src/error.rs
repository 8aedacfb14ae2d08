use thiserror::Error;

#[derive(Debug, Error)]
pub enum TngError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("expert lost: pose is {distance:.3} m from trajectory {trajectory}")]
    ExpertLost { trajectory: u32, distance: f64 },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("no path from vertex {from} to vertex {to}")]
    NoPath { from: usize, to: usize },
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("percentage autonomy undefined for zero total time")]
    ZeroDuration,
    #[error("cannot access {path}: {cause}")]
    Io { path: String, cause: std::io::Error },
}

pub type Result<T, E = TngError> = std::result::Result<T, E>;

impl TngError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        TngError::Io {
            path: path.as_ref().display().to_string(),
            cause: source,
        }
    }
}
