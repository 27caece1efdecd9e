use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the sensing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient window: need {needed_s:.3} s of batches, got {got_s:.3} s")]
    InsufficientWindow { needed_s: f64, got_s: f64 },

    #[error("no spectral peak: {0}")]
    NoPeak(String),

    #[error("dominant frequency {freq_hz:.3} Hz outside [{lo_hz}, {hi_hz}] Hz")]
    OutOfBand { freq_hz: f64, lo_hz: f64, hi_hz: f64 },

    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    RateMismatch(f64, f64),

    #[error("malformed file {}: {reason}", path.display())]
    MalformedFile { path: PathBuf, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
