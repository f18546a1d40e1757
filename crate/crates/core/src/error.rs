//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Grid construction rejected (non-power-of-two size, degenerate interval, ...).
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// A physical or algorithmic parameter is out of range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two fields or a field and a grid do not live on the same sample points.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Input data contains NaN or infinite values.
    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// A time-stepping run blew up; `step` is the last step that was healthy.
    #[error("numerical failure at step {step}: {detail}")]
    NumericalFailure { step: usize, detail: String },

    /// An operation that divides by a norm received a zero-norm field.
    #[error("zero-norm input")]
    ZeroNorm,

    /// The requested combination is not supported.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
