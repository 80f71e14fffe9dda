//! Crate-wide error type.

/// Errors raised by construction, numeric routines and the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A mid-run violation of an algorithm invariant; the run is aborted.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("invalid config: {0}")]
    Config(String),
}

pub type Result<T> = core::result::Result<T, Error>;
