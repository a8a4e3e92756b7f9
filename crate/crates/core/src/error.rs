use std::path::PathBuf;

/// Errors raised by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} = {value} s is not an integer multiple of the base step {step} s")]
    Misaligned {
        what: &'static str,
        value: f64,
        step: f64,
    },

    #[error("observation width mismatch: expected {expected}, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },

    #[error("replay buffer holds {len} transitions but a batch needs {batch}")]
    InsufficientBuffer { len: usize, batch: usize },

    #[error("{path}: {field}: {reason}")]
    Format {
        path: PathBuf,
        field: String,
        reason: String,
    },

    #[error("trajectory too short: spans {span} s, need at least {required} s")]
    TooShort { span: f64, required: f64 },

    #[error("{0}")]
    Unsupported(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(
        path: impl Into<PathBuf>,
        field: impl Into<String>,
        reason: impl Into<String>,
    ) -> Self {
        Error::Format {
            path: path.into(),
            field: field.into(),
            reason: reason.into(),
        }
    }
}
