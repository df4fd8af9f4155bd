use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch at {layer}: expected {expected}, got {got}")]
    Dimension {
        layer: String,
        expected: usize,
        got: usize,
    },

    #[error("label {label} out of range at row {row}")]
    LabelOutOfRange { row: usize, label: i64 },

    #[error("task {task}: {source}")]
    InTask {
        task: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite logit at position {index}")]
    NonFiniteLogit { index: usize },

    #[error("non-finite value in task {task}")]
    NonFinite { task: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}, task {task}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        task: usize,
    },

    #[error("non-finite parameter after update in {0}")]
    NonFiniteUpdate(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{0}")]
    Format(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn in_task(self, task: usize) -> Self {
        Error::InTask {
            task,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
