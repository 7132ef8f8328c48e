use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("qubit count {0} is outside the supported range 1..=64")]
    QubitCount(usize),

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("dense budget exceeded: {what} = {value} > {limit}")]
    BudgetExceeded {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("operator is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("representation mismatch: {0}")]
    Representation(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("pulse rejected: {0}")]
    InvalidPulse(String),

    #[error("integration step too large: trace drift {drift:.3e} at t = {time:.4} us; try dt <= {suggested:.3e}")]
    StepTooLarge {
        drift: f64,
        time: f64,
        suggested: f64,
    },

    #[error("optimizer diverged: {0}")]
    Diverged(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("scenario `{name}` failed: {reason}")]
    ScenarioFailed { name: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
