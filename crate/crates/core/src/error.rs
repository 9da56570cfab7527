//! Crate-wide error type shared by every forecaster and the panel engine.

use chrono::NaiveDate;
use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("unknown category `{0}`")]
    UnknownCategory(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid horizon: must be at least 1 step")]
    InvalidHorizon,

    #[error("singular system: columns are linearly dependent and no ridge was applied")]
    SingularSystem,

    #[error("need at least 2 input features, got {got}")]
    InsufficientFeatures { got: usize },

    #[error("budget exceeded: {required} evaluations exceed the budget of {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("no convergence after {passes} optimization passes")]
    NoConvergence { passes: usize },

    #[error("all candidates failed: {}", .causes.join("; "))]
    AllCandidatesFailed { causes: Vec<String> },

    #[error("format error at row {row}, column `{column}`: {message}")]
    Format {
        row: usize,
        column: String,
        message: String,
    },

    #[error("date gap at row {row}: expected {expected}, found {found}")]
    DateGap {
        row: usize,
        expected: NaiveDate,
        found: NaiveDate,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Coarse machine-readable classification used by the CLI's structured
    /// error objects and exit codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) | Error::InvalidHorizon | Error::UnknownCategory(_) => {
                "config"
            }
            Error::Format { .. }
            | Error::DateGap { .. }
            | Error::InsufficientData { .. }
            | Error::EmptyInput => "data",
            Error::Io(_) => "io",
            Error::AllCandidatesFailed { .. } => "candidates",
            Error::SingularSystem
            | Error::NumericalFailure(_)
            | Error::NoConvergence { .. }
            | Error::DomainError(_) => "numeric",
            _ => "internal",
        }
    }
}
