use thiserror::Error;

/// Errors produced by the tensor algebra, the solvers and the file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape {dims:?}: {reason}")]
    InvalidShape { dims: Vec<usize>, reason: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("mode {mode} out of range for an order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("rank {rank} out of range for mode {mode} of dimension {dim}")]
    RankOutOfRange { mode: usize, rank: usize, dim: usize },

    #[error("index {index:?} out of bounds for shape {dims:?}")]
    IndexOutOfBounds { index: Vec<usize>, dims: Vec<usize> },

    #[error("duplicate sparse index {0:?}")]
    DuplicateIndex(Vec<usize>),

    #[error("non-finite value at flat position {0}")]
    NonFinite(usize),

    #[error("factor {mode} is not orthonormal (deviation {deviation:.3e})")]
    NotOrthonormal { mode: usize, deviation: f64 },

    #[error("spikiness of the zero tensor is undefined")]
    ZeroTensor,

    #[error("matricization {mode} is rank deficient at declared rank {rank}")]
    RankDeficient { mode: usize, rank: usize },

    #[error("core matricization {mode} is rank deficient (sigma_min/sigma_max = {ratio:.3e})")]
    RankDeficientCore { mode: usize, ratio: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid observations: {0}")]
    InvalidObservation(String),

    #[error("infeasible spectrum request: {0}")]
    InfeasibleSpectrum(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
