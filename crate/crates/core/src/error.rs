use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty span")]
    EmptySpan,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(
        "not a projection: idempotence defect {idempotence:e}, hermiticity defect {hermiticity:e}"
    )]
    NotAProjection { idempotence: f64, hermiticity: f64 },

    #[error("non-finite entry")]
    NonFinite,

    #[error("grid mismatch")]
    GridMismatch,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("negative time {0} for the heat semigroup (use the Schrödinger group for reversible dynamics)")]
    NegativeTime(f64),

    #[error("initial state annihilated by projection")]
    AnnihilatedByProjection,

    #[error("trajectory needs at least 2 samples, found {0}")]
    TooFewSamples(usize),

    #[error("trajectory times must be strictly increasing")]
    NonIncreasingTimes,

    #[error("not strictly local: worst off-diagonal block norm {worst:e}")]
    NotStrictlyLocal { worst: f64 },

    #[error("locality analysis refused: N*d = {size} exceeds limit {limit}")]
    TooLarge { size: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
