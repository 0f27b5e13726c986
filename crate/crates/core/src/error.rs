use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("SH degree {0} out of range 0..=4")]
    InvalidShDegree(usize),

    #[error("direction is not unit length (|d| = {0})")]
    NonUnitDirection(f64),

    #[error("{what}: expected {expected} values, got {actual}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("degenerate bounding box: {0}")]
    DegenerateBox(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("bad file format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("scene parse error: {0}")]
    SceneParse(#[from] toml::de::Error),

    #[error("non-finite loss at iteration {iteration}: {detail}")]
    NonFiniteLoss {
        iteration: usize,
        detail: String,
        snapshot: Box<crate::training::FitSnapshot>,
    },
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
