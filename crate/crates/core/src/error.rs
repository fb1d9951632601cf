use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum EbmError {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("unknown term `{0}`")]
    Lookup(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("undefined metric: {0}")]
    Undefined(String),

    #[error("unsupported model format version `{0}`")]
    Version(String),

    #[error("malformed model file: {0}")]
    Malformed(String),

    #[error("model checksum mismatch (expected {expected}, found {found})")]
    Checksum { expected: String, found: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("split {split}: {source}")]
    InSplit {
        split: usize,
        #[source]
        source: Box<EbmError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = EbmError> = std::result::Result<T, E>;
