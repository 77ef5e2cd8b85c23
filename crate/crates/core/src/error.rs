use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: expected {expected} cells, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: column `{column}` is numerical but `{value}` is not a number")]
    BadNumber {
        line: u64,
        column: String,
        value: String,
    },
    #[error("schema does not match header: {0}")]
    SchemaMismatch(String),
    #[error("column mismatch between train and test: {0}")]
    ColumnMismatch(String),
    #[error("no modelable (numerical or categorical) columns remain")]
    NoModelableColumns,
    #[error("label column `{column}` has non-binary value `{value}` at row {row}")]
    NonBinaryLabel {
        column: String,
        row: usize,
        value: String,
    },
    #[error("feature set mismatch: {0}")]
    FeatureMismatch(String),
    #[error("empty data: {0}")]
    EmptyData(&'static str),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("learner does not support missing values; encode with impute_zero")]
    MissingNotSupported,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("cannot build {folds} stratified folds: {reason}")]
    Folds { folds: usize, reason: String },
    #[error("serialization error: {0}")]
    Serde(String),
    #[error("invalid config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
