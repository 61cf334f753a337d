use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest {path}: {msg}")]
    Manifest { path: PathBuf, msg: String },

    #[error("manifest {path}, line {line}: {msg}")]
    ManifestRow {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("image {path}: {msg}")]
    Image { path: PathBuf, msg: String },

    #[error("split: {0}")]
    Split(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },

    #[error("model: {0}")]
    Model(String),

    #[error("feature store: {0}")]
    Store(String),

    #[error("layout mismatch: stored {stored}, requested {requested}")]
    Layout { stored: String, requested: String },

    #[error("checksum mismatch for {what}: expected {expected}, found {found}")]
    Checksum {
        what: String,
        expected: String,
        found: String,
    },

    #[error("npy: {0}")]
    Npy(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("backward called before forward")]
    BackwardBeforeForward,

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("linear solver: {0}")]
    Solver(String),

    #[error("config: {0}")]
    Config(String),

    #[error("stage {stage} (repeat {repeat}): {source}")]
    Stage {
        stage: String,
        repeat: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: impl std::fmt::Debug, found: impl std::fmt::Debug) -> Self {
        Error::Shape {
            expected: format!("{expected:?}"),
            found: format!("{found:?}"),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Wraps an error with the pipeline stage and repeat index it came from.
    pub fn in_stage(self, stage: &str, repeat: usize) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            repeat,
            source: Box::new(self),
        }
    }
}
