//! Error type shared across the library.

use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A PGM file does not follow the binary (P5) format.
    #[error("malformed PGM at byte {offset}: {reason}")]
    PgmFormat { offset: usize, reason: String },

    /// A pixel value cannot be stored losslessly in the requested encoding.
    #[error("pixel {index} has value {value} outside [0, {peak}]")]
    Range { index: usize, value: f64, peak: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Shorthand for precondition checks that should surface as argument errors.
macro_rules! ensure_arg {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err($crate::error::Error::Argument(format!($($fmt)+)));
        }
    };
}

pub(crate) use ensure_arg;
