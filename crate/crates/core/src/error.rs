use std::path::PathBuf;

use tactovis_nn::ShapeError;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("missing data: {0}")]
    MissingData(String),
    #[error("non-finite value: {0}")]
    Numeric(String),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Checkpoint(_) => 2,
            Error::MissingData(_) => 3,
            Error::Numeric(_) => 4,
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 3,
            _ => 1,
        }
    }

    /// Short stable identifier for machine-parseable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "bad-config",
            Error::MissingData(_) => "missing-data",
            Error::Numeric(_) => "numeric",
            Error::Shape(_) => "shape",
            Error::Invalid(_) => "invalid-input",
            Error::Io { .. } => "io",
            Error::Image { .. } => "image",
            Error::Json { .. } => "json",
            Error::Checkpoint(_) => "checkpoint",
        }
    }
}
