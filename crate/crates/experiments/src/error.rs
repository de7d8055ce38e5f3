use std::path::PathBuf;

use pmse_core::PmseError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Core(#[from] PmseError),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

impl ExperimentError {
    /// Stable short name used in the command-line error line.
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentError::Core(e) => match e {
                PmseError::Shape { .. } => "shape",
                PmseError::Parse { .. } => "parse",
                PmseError::Index { .. } => "index",
                PmseError::Domain(_) => "domain",
                PmseError::ModelDomain(_) => "model-domain",
                PmseError::Resource(_) => "resource",
                PmseError::Io { .. } => "io",
                PmseError::Csv { .. } => "csv",
            },
            ExperimentError::Config(_) => "config",
            ExperimentError::DegenerateDesign(_) => "degenerate-design",
            ExperimentError::Io { .. } => "io",
            ExperimentError::Json { .. } => "json",
            ExperimentError::Csv { .. } => "csv",
        }
    }
}
