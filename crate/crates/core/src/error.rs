use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("division by zero")]
    ZeroDivision,
    #[error("exponential requires nonnegative valuation")]
    NegativeValuation,
    #[error("matrix has rank {found}, expected {expected}")]
    RankDeficient { expected: usize, found: usize },
    #[error("index {index} out of range (length {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unsupported dimension {0} (exact enumeration needs n <= 3)")]
    UnsupportedDimension(usize),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("coordinate {0} is zero")]
    ZeroCoordinate(usize),
    #[error("zero polynomial")]
    ZeroPolynomial,
    #[error("singular Jacobian at seed (|det| = {0:e})")]
    SingularJacobian(f64),
    #[error("seed does not solve the initial system (residual {0:e})")]
    NoRoot(f64),
    #[error("Newton iteration stalled at residual valuation {0}")]
    Stalled(String),
    #[error("coordinate {0} does not have the prescribed valuation")]
    ValuationMismatch(usize),
    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),
    #[error("invalid correction term: {0}")]
    InvalidCorrection(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
