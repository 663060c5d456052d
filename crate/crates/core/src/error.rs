//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad argument to an operation (dimension mismatch, negative time, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Invalid configuration (step size too large, malformed config file, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A numeric failure during simulation (non-finite state).
    #[error("numeric failure at step {step}: {msg}")]
    Numeric { step: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
