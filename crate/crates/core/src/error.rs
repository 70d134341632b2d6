//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a physical or mathematical precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value is inconsistent or out of range.
    #[error("configuration error: {0}")]
    Config(String),

    /// Training diverged or could not proceed.
    #[error("training error (member {member}, epoch {epoch}): {message}")]
    Training {
        member: usize,
        epoch: usize,
        message: String,
    },

    /// A model file failed to load or validate. `field` is the path of the
    /// offending entry inside the file.
    #[error("model error at {field}: {message}")]
    Model { field: String, message: String },

    /// A CSV cell or row could not be parsed. Rows are 1-based and count the
    /// header as row 1.
    #[error("csv error at {path}:{row}: {message}")]
    CsvData {
        path: String,
        row: usize,
        message: String,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn model(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Model {
            field: field.into(),
            message: msg.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
