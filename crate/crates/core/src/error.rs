use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("undefined SNR: signal has zero power")]
    UndefinedSnr,

    #[error("position outside room: {0}")]
    OutsideRoom(String),

    #[error("DOA {0} is not on the grid")]
    OffGrid(f64),

    #[error("duplicate DOA {0}")]
    DuplicateDoa(f64),

    #[error("empty block")]
    EmptyBlock,

    #[error("noise subspace empty: {sources} sources with {mics} microphones")]
    NoiseSubspaceEmpty { sources: usize, mics: usize },

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("diverged: non-finite gradient")]
    Diverged,

    #[error("missing RIRs: {}", .0.join(", "))]
    MissingRirs(Vec<String>),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("unsupported format: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}
