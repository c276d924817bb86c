use thiserror::Error;

/// Errors produced by the library.
///
/// The variants separate bad input data from numerical trouble so callers
/// (the CLI in particular) can map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Input text could not be parsed into a table.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// Parsed data violates a structural invariant.
    #[error("invalid data: {0}")]
    Validation(String),

    /// A numerical routine failed to converge or left its domain.
    #[error("numeric failure in {stage}: {message}")]
    Numeric { stage: String, message: String },

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }

    pub fn numeric(stage: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Numeric {
            stage: stage.into(),
            message: message.into(),
        }
    }

    /// Tag the error with the pipeline stage it surfaced in, keeping the
    /// variant (and therefore the caller's exit-code mapping) unchanged.
    pub fn in_stage(self, stage: &str) -> Error {
        match self {
            Error::Validation(m) => Error::Validation(format!("[{stage}] {m}")),
            Error::Numeric {
                stage: inner,
                message,
            } => Error::Numeric {
                stage: format!("{stage}/{inner}"),
                message,
            },
            Error::Parse { location, message } => Error::Parse {
                location: format!("{stage}: {location}"),
                message,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
