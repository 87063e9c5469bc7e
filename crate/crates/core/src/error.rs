use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A document could not be decoded. `context` names the offending record.
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("tensor format error: {0}")]
    Format(String),

    #[error("tensor truncated: header declares {expected} bytes of payload, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A caller broke a documented contract (unsorted input, impossible counts).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The requested metric has no defined value for the given inputs.
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    /// A metric was requested on data that does not satisfy its precondition.
    #[error("metric precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }
}
