use thiserror::Error;

/// Errors raised by the direction-discovery pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller-side problem: bad shapes, bad parameters, missing columns.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input file content does not match the expected layout.
    #[error("schema error: {0}")]
    Schema(String),

    /// A factorization or statistic failed numerically.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Prefixes the message with the pipeline step that produced it.
    pub fn context(self, step: &str) -> Self {
        match self {
            Error::InvalidArgument(m) => Error::InvalidArgument(format!("{step}: {m}")),
            Error::Schema(m) => Error::Schema(format!("{step}: {m}")),
            Error::Numeric(m) => Error::Numeric(format!("{step}: {m}")),
            Error::Io(e) => Error::Io(std::io::Error::new(e.kind(), format!("{step}: {e}"))),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
