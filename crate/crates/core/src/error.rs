use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = GrlError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GrlError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("layer index {index} out of range (network has {layers} layers)")]
    LayerIndex { index: usize, layers: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("position {x} outside track [0, {length}]")]
    OutsideTrack { x: f64, length: f64 },

    #[error("agent {agent} in generation {generation} produced a NaN loss")]
    NanAbort { generation: u32, agent: usize },

    #[error("checkpoint {path}: {reason}")]
    CheckpointCorrupt { path: PathBuf, reason: String },

    #[error("checkpoint version mismatch: {0}")]
    CheckpointVersion(String),

    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl GrlError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GrlError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            GrlError::Config(_) => 2,
            GrlError::NanAbort { .. } | GrlError::NonFinite(_) => 3,
            GrlError::CheckpointCorrupt { .. } | GrlError::CheckpointVersion(_) => 4,
            _ => 1,
        }
    }
}
