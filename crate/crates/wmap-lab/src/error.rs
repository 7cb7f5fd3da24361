//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by coefficient-space operations, models, samplers and
/// solvers.
///
/// Validation is strict throughout the crate: truncations must match exactly,
/// parameters must lie in their documented ranges, and non-finite values are
/// rejected at construction instead of propagating as NaN.
#[derive(Debug, Error)]
pub enum Error {
    /// Two objects with different truncations were combined.
    #[error("truncation mismatch: expected {expected}, found {found}")]
    TruncMismatch { expected: usize, found: usize },

    /// A 1-based coordinate index fell outside `1..=trunc`.
    #[error("coordinate index {index} out of range for truncation {trunc}")]
    IndexOutOfRange { index: usize, trunc: usize },

    /// A parameter violated its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// An input or intermediate value was NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A model was given the wrong kind of state (plain coefficient vector vs.
    /// hierarchical state with a hyperparameter).
    #[error("state mismatch: {0}")]
    StateMismatch(String),

    /// Operator, data and model dimensions disagree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A sample batch with no draws was supplied.
    #[error("empty sample batch")]
    EmptyBatch,

    /// Importance weights summed to zero (or were otherwise unusable).
    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    /// An iterative solve stopped at `max_iter` above its gradient tolerance
    /// in a context that requires convergence.
    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NotConverged { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
