use thiserror::Error;

/// Errors produced anywhere in the simulator pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {0} is not a power of two >= 2")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("spin index {index} out of range for {n} spins")]
    SpinOutOfRange { index: usize, n: usize },

    #[error("qubit count {0} is outside the supported range")]
    UnsupportedQubitCount(usize),

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("negative duration {0} s")]
    NegativeDuration(f64),

    #[error("invalid spin system: {0}")]
    InvalidSystem(String),

    #[error("no coupling between spins {0} and {1}")]
    ZeroCoupling(usize, usize),

    #[error("refocusing infeasible: {0}")]
    InfeasibleRefocusing(String),

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("zero-norm operator where a nonzero one is required")]
    ZeroNorm,

    #[error("invalid acquisition parameters: {0}")]
    InvalidAcquisition(String),

    #[error("measurement set is rank deficient (rank {rank}, need {needed})")]
    RankDeficient { rank: usize, needed: usize },

    #[error("{0}")]
    Io(String),

    #[error("json: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
