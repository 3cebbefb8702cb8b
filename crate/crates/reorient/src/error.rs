use std::path::{Path, PathBuf};

use reorient_core::control::ControlFailure;
use reorient_core::dataset::DatasetError;
use reorient_core::estimate::EstimatorError;
use reorient_core::mesh::MeshError;
use reorient_core::render::RenderError;
use reorient_core::sampling::ConstraintViolation;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments or configuration; the CLI exits with status 2.
    #[error("usage: {0}")]
    Usage(String),
    #[error("io error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{} already exists (pass --force to overwrite)", path.display())]
    Exists { path: PathBuf },
    #[error("malformed {}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Mesh {
        path: PathBuf,
        #[source]
        source: MeshError,
    },
    #[error("{}: record {index}: {violation}", path.display())]
    ConstraintViolation {
        path: PathBuf,
        index: usize,
        violation: ConstraintViolation,
    },
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Control(#[from] ControlFailure),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn format(path: impl AsRef<Path>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.as_ref().to_path_buf(),
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Error::Usage(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            _ => 1,
        }
    }
}
