use thiserror::Error;

/// Errors returned by the library. Each variant is an input the callee refused.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    SampleRateMismatch(f64, f64),

    #[error("stream too short: need {needed} samples, have {available}")]
    StreamTooShort { needed: usize, available: usize },

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("malformed frame: {0}")]
    MalformedFrame(String),

    #[error("link table has no surface for {0}")]
    MissingSurface(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
