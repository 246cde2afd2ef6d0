use thiserror::Error;

/// Errors surfaced by the library. Parse errors carry a 1-based source
/// position; precondition violations describe which contract was broken.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("internal invariant failed: {0}")]
    Internal(String),
}

impl Error {
    pub fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    pub fn precondition(message: impl Into<String>) -> Self {
        Error::Precondition(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
