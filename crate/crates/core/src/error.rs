use thiserror::Error;

/// Errors produced by the model and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OffloadError {
    /// A configuration or argument violates a documented invariant.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A positive split was paired with a zero-length time window.
    #[error("infeasible input: {0}")]
    InfeasibleInput(String),

    /// No schedule satisfies the constraints. The message names the binding cap.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The barrier solver stopped before reaching its tolerances.
    #[error("solver did not converge: {0}")]
    NotConverged(String),
}

pub type Result<T> = std::result::Result<T, OffloadError>;

pub(crate) fn invalid(msg: impl Into<String>) -> OffloadError {
    OffloadError::InvalidInput(msg.into())
}
