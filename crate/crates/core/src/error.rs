//! Error types shared across the toolkit.
//!
//! The discipline throughout is fail-fast: positivity and dimension guards
//! raise errors instead of clamping, so a corrupted state is never silently
//! repaired.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A link's endpoints coincide, so its distance (and weight) is undefined.
    #[error("invalid link: {0}")]
    InvalidLink(String),

    /// Two objects that must agree in dimension do not.
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: String,
    },

    /// A hyperparameter violates its domain (e.g. a nonpositive precision).
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),

    /// A configuration value is out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A variational state no longer satisfies its invariants.
    #[error("corrupt state: {0}")]
    CorruptState(String),

    /// A numerical guard tripped (e.g. an update produced a nonpositive scale).
    #[error("numerical guard: {0}")]
    NumericalGuard(String),

    /// The objective became non-finite; the iteration index is reported.
    #[error("divergence at iteration {iteration}: {message}")]
    Divergence { iteration: usize, message: String },

    /// A least-squares system is rank deficient or not positive definite.
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// A candidate pool was empty where at least one pair is required.
    #[error("empty candidate pool")]
    EmptyPool,

    /// A ratio's denominator vanished.
    #[error("zero denominator: {0}")]
    ZeroDenominator(String),

    /// A text record could not be parsed; the 1-based line number is reported.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed JSON input.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Convenience constructor for dimension mismatches.
    pub fn dims(expected: usize, actual: usize, context: &str) -> Self {
        Error::DimensionMismatch {
            expected,
            actual,
            context: context.to_string(),
        }
    }
}
