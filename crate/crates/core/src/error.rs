use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the data, tree, utility and mechanism layers.
#[derive(Debug, Error)]
pub enum PmseError {
    #[error("shape mismatch: {context}: expected {expected}, found {found}")]
    Shape {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("parse error at row {row}, column {column}: {value:?} is not a number")]
    Parse {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("row index {index} out of range for {rows} rows")]
    Index { index: usize, rows: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parameter outside model domain: {0}")]
    ModelDomain(String),

    #[error("search budget exceeded: {0}")]
    Resource(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = PmseError> = std::result::Result<T, E>;

impl PmseError {
    pub(crate) fn shape(
        context: &'static str,
        expected: impl ToString,
        found: impl ToString,
    ) -> Self {
        PmseError::Shape {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
