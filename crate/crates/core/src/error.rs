use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates an operation's preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Model, filter, or experiment configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A binary or text file could not be decoded.
    #[error("parse error in {chunk}: {message}")]
    Parse { chunk: String, message: String },

    /// File header does not match what the reader expects.
    #[error("format mismatch: {0}")]
    Format(String),

    /// A tensor went non-finite during training or fitting.
    #[error("non-finite values in {tensor} (step {step})")]
    NonFinite { tensor: String, step: usize },

    /// A solver could not produce a result.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Not enough frames or samples to run an analysis.
    #[error("insufficient data: need at least {needed} {what}, got {got}")]
    InsufficientData {
        what: String,
        needed: usize,
        got: usize,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(chunk: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            chunk: chunk.into(),
            message: message.into(),
        }
    }

    pub(crate) fn insufficient(what: impl Into<String>, needed: usize, got: usize) -> Self {
        Error::InsufficientData {
            what: what.into(),
            needed,
            got,
        }
    }
}
