use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the estimator, tracker and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor was handed an out-of-range value.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam {
        name: &'static str,
        reason: String,
    },

    /// Vector/matrix shapes do not compose.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A numeric routine failed (overflow, divergence, bracket failure, ...).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// No particle produced a finite likelihood for this frame.
    #[error("tracking lost at frame {frame}: no particle produced a finite likelihood")]
    TrackingLost { frame: usize },

    /// Filesystem failure, tagged with the offending path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A text or image file did not parse; `line` is 1-based (0 for whole-file problems).
    #[error("parse error at {path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
