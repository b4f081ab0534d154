//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    /// A caller-supplied argument violates a precondition (bad grid, p <= 0,
    /// index out of range, non-finite input, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The Euler scheme produced a non-finite state.
    #[error("integration diverged at fine index {fine_index}: {what}")]
    IntegrationDiverged { fine_index: usize, what: String },

    /// An estimator was applied outside its domain of validity (e.g. the
    /// continuous-case statistic on a path with jumps, or a studentizer on a
    /// non-even functional).
    #[error("misuse: {0}")]
    Misuse(String),

    /// The functional has no usable directional derivative in this regime.
    #[error("unsupported derivative: {0}")]
    UnsupportedDerivative(String),

    /// A variance estimate was non-positive where a positive one is required.
    #[error("degenerate variance: {value}")]
    DegenerateVariance { value: f64 },

    /// Requested combination is not supported (closed form for the range
    /// family, CLT exponents in (2, 3], ...).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A checked-in or precomputed constant is inconsistent (e.g. a negative
    /// variance derived from the lambda table).
    #[error("internal constant error: {0}")]
    InternalConstant(String),

    /// Configuration problem; the message names the offending key.
    #[error("config error ({key}): {reason}")]
    Config { key: String, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed CSV/TOML input.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
