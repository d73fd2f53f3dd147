//! Error type shared by every stage of the pipeline.

use std::fmt;

/// Everything that can go wrong between problem construction and recovery.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A Cholesky pivot was not strictly positive: the matrix is not
    /// positive definite. Carries the zero-based pivot index.
    NotPositiveDefinite { pivot: usize },
    /// Two operands disagree about a dimension. `context` names the
    /// operation, `expected`/`got` the mismatched sizes.
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    /// An input contained NaN or an infinity. `context` names the field.
    NonFiniteData { context: &'static str },
    /// The requested duality-gap tolerance is outside (0, 2n).
    InvalidTolerance { epsilon: f64, limit: f64 },
    /// A penalty weight was not strictly positive.
    InvalidPenalty { index: usize, value: f64 },
    /// A configuration value failed validation (empty horizon, crossed
    /// input bounds, wrong state dimension, ...).
    InvalidConfig { message: String },
    /// A closed-loop simulation failed at the given step; wraps the cause.
    SimulationStep { step: usize, source: Box<Error> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotPositiveDefinite { pivot } => {
                write!(f, "matrix is not positive definite (pivot {pivot} <= 0)")
            }
            Error::DimensionMismatch {
                context,
                expected,
                got,
            } => write!(f, "{context}: dimension mismatch (expected {expected}, got {got})"),
            Error::NonFiniteData { context } => {
                write!(f, "{context}: input contains a non-finite value")
            }
            Error::InvalidTolerance { epsilon, limit } => write!(
                f,
                "tolerance {epsilon} is outside the valid range (0, {limit})"
            ),
            Error::InvalidPenalty { index, value } => {
                write!(f, "penalty weight {index} must be positive, got {value}")
            }
            Error::InvalidConfig { message } => write!(f, "invalid configuration: {message}"),
            Error::SimulationStep { step, source } => {
                write!(f, "simulation failed at step {step}: {source}")
            }
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::SimulationStep { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
