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

    #[error("{path}: line {line}: {message}")]
    Load {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid block plan: {0}")]
    InvalidPlan(String),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    Encode {
        row: usize,
        column: String,
        value: String,
    },

    #[error("encoder usage: {0}")]
    EncoderUsage(String),

    #[error("AUC undefined: {0}")]
    UndefinedAuc(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("ranking: {0}")]
    Ranking(String),

    #[error(transparent)]
    Predictor(#[from] PredictorError),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failure raised by a predictor during `learn` or `predict`.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum PredictorError {
    #[error("predictor exceeded its time budget")]
    Timeout,
    #[error("predictor failed: {0}")]
    Failed(String),
    #[error("malformed prediction: {0}")]
    Malformed(String),
}
