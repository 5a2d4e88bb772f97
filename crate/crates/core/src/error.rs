use thiserror::Error;

/// Errors produced by the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    /// The scenario breaks a hard invariant (shape, sign, finiteness).
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("index {index} out of range for vector of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    /// A caller broke a documented precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// The reduction to one user per (cell, sub-carrier) only holds for the
    /// unweighted sum rate.
    #[error("non-uniform rate weights are not supported by the solver")]
    UnsupportedWeights,
    /// No non-negative power vector realises the requested SINR vector.
    #[error("SINR vector is inconsistent: {0}")]
    Inconsistent(String),
    #[error("linear program solver failed: {0}")]
    SolverFailure(String),
    #[error("Dinkelbach projection did not converge after {iterations} iterations (lambda = {lambda}, gap = {gap:e})")]
    NoConvergence {
        iterations: usize,
        lambda: f64,
        gap: f64,
    },
    #[error("dimension guard: {0}")]
    DimensionGuard(String),
    #[error("unknown algorithm {0:?}")]
    UnknownAlgorithm(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
