use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("cut is not supported on the integer coordinates: {0}")]
    InvalidCut(String),

    #[error("unknown constraint tag {0}")]
    UnknownTag(String),

    #[error("cannot certify a lower bound: {0}")]
    CannotCertify(String),

    #[error("no branching inequality: relaxation point is integral")]
    NoBranch,

    #[error("enumeration box too large: {points} points (limit {limit})")]
    BoxTooLarge { points: f64, limit: f64 },

    #[error("matrix A is rank deficient")]
    RankDeficient,

    #[error("{0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
