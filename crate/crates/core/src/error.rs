use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("non-finite value produced by layer {layer}")]
    NonFinite { layer: String },

    #[error("training diverged at epoch {epoch} (loss is not finite)")]
    Diverged { epoch: usize },

    #[error("value {value} outside the domain {domain}")]
    OutOfDomain { value: f64, domain: &'static str },

    #[error("sample rate {actual_hz:.4e} Hz is too low, at least {required_hz:.4e} Hz is required")]
    InsufficientSampleRate { required_hz: f64, actual_hz: f64 },

    #[error("all {trials} hyperparameter trials diverged")]
    AllTrialsDiverged { trials: usize },

    #[error("bad file format in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("configuration error at `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error("{path} was produced by configuration {found}, the current configuration hashes to {expected}; use another output directory")]
    ConfigHashMismatch { path: PathBuf, expected: String, found: String },

    #[error("{what} not found at {path}; {hint}")]
    MissingArtifact { what: String, path: PathBuf, hint: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
