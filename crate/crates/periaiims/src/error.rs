//! Error type shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("unparseable cell at row {row}, column {column}: {detail}")]
    BadCell {
        row: usize,
        column: String,
        detail: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("column provenance mismatch: {0}")]
    Provenance(String),

    #[error("correlation repair failed to converge: smallest eigenvalue {0}")]
    PsdRepair(f64),

    #[error("unknown surgery label: {0}")]
    UnknownSurgery(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("all grid points failed: {0}")]
    GridExhausted(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
