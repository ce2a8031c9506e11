use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = DgError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DgError {
    #[error("invalid polynomial order {order}: supported range is 1..={max}")]
    InvalidOrder { order: usize, max: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("material error: {0}")]
    Material(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("sweep error: {0}")]
    Sweep(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DgError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DgError::Io {
            path: path.into(),
            source,
        }
    }
}
