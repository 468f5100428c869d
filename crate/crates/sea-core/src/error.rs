//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SeaError {
    /// The supplied matrix is not a valid state operator.
    #[error("not a state operator: {0}")]
    NotAState(String),

    /// Operator dimensions do not match.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A zero eigenvalue of the state left the tolerated band during
    /// propagation with the kernel unlocked (or a locked kernel blew up).
    #[error("kernel violation: eigenvalue {eigenvalue:.3e} crossed the kernel band")]
    KernelViolation { eigenvalue: f64 },

    /// The integrator ran out of its step budget.
    #[error("max steps exceeded ({max})")]
    MaxStepsExceeded { max: usize },

    /// Requested mean values cannot be realized by any state of the model.
    #[error("infeasible target: {0}")]
    Infeasible(String),

    /// Argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    DomainError(String),

    /// Invalid subsystem index set for a partial trace.
    #[error("bad index set: {0}")]
    BadIndexSet(String),

    /// An observable basis whose restrictions to the range of the state are
    /// linearly dependent.
    #[error("singular basis: {0}")]
    SingularBasis(String),

    /// The integrator could not produce an acceptable step.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Relaxation time evaluated to a non-positive value.
    #[error("invalid relaxation time: tau = {0}")]
    InvalidTau(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SeaError>;
