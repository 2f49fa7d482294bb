use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced by the geometry kernels, estimators and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("exact enumeration needs {tuples} tuples, above the budget of {budget}; use Monte Carlo mode")]
    BudgetExceeded { tuples: u128, budget: u64 },

    #[error("separation failed at stage {stage}: {reason}")]
    SeparationFailure { stage: usize, reason: String },

    #[error("invalid candidate: {0}")]
    InvalidCandidate(String),

    #[error("plane selection failed: {0}")]
    SelectionFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Budget, separation and selection failures are "could not compute"
    /// conditions rather than malformed input.
    pub fn is_computation_failure(&self) -> bool {
        matches!(
            self,
            Error::BudgetExceeded { .. }
                | Error::SeparationFailure { .. }
                | Error::InvalidCandidate(_)
                | Error::SelectionFailure(_)
        )
    }
}
