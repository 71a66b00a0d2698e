//! Error type shared by all modules.

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A parameter lies outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// An argument is structurally invalid (wrong length, empty set, ...).
    #[error("argument error: {0}")]
    Argument(String),

    /// A resolvent or linear solve hit a (numerically) singular system.
    #[error("singularity error: {0}")]
    Singular(String),

    /// A construction failed (non-contractive root map, uncovered node, ...).
    #[error("construction error: {0}")]
    Construction(String),

    /// A numerical routine failed to converge or produced non-finite data.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Mutually inconsistent inputs (e.g. zero denominator with nonzero numerator).
    #[error("inconsistency error: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
    pub fn singular(msg: impl Into<String>) -> Self {
        Error::Singular(msg.into())
    }
    pub fn construction(msg: impl Into<String>) -> Self {
        Error::Construction(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
    pub fn inconsistent(msg: impl Into<String>) -> Self {
        Error::Inconsistent(msg.into())
    }
}
