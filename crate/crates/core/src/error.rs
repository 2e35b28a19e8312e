use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("root bracketing failed: {0}")]
    Bracketing(String),

    #[error("integration became unstable at t = {t}: {reason}")]
    Unstable { t: f64, reason: String },

    #[error("front reached the edge of the preallocated domain at t = {t}")]
    DomainExhausted { t: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("threshold does not exist in this regime: {0}")]
    Regime(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
