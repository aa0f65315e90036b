use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point is not valid in {model}: {reason}")]
    InvalidPoint { model: String, reason: String },

    #[error("model mismatch: map lives on {map_model}, point or map on {other}")]
    ModelMismatch { map_model: String, other: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An operation refuses to run because a structural precondition fails
    /// (for example a gauge whose weight series is not summable).
    #[error("refused: {0}")]
    Refused(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid(msg: impl Into<String>) -> LabError {
    LabError::InvalidInput(msg.into())
}
