use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// Structurally invalid document; `offset` is a byte position in the source.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    /// A bad row in a delimited file. `line` is 1-based.
    #[error("{source_name}, line {line}: {message}")]
    Row {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),
}

impl Error {
    pub fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }

    pub fn row(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Row {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
