use std::path::PathBuf;

/// Errors surfaced by the simulation, learning and evaluation stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite quadrotor state after integration step")]
    NonFiniteState,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("invalid pixel ({u}, {v}): outside the camera model's valid region")]
    InvalidPixel { u: f64, v: f64 },

    #[error("invalid track: {0}")]
    InvalidTrack(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("checkpoint network hash {found:#018x} does not match expected {expected:#018x}")]
    SpecMismatch { expected: u64, found: u64 },

    #[error("expected {expected} actions, got {found}")]
    CountMismatch { expected: usize, found: usize },

    #[error("non-finite loss during update: {0}")]
    NonFiniteLoss(String),

    #[error("config error in {path}: {reason}")]
    Config { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
