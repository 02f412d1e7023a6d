use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length mismatch: {0} values against {1} weights")]
    LengthMismatch(usize, usize),
    #[error("negative input value {0}")]
    NegativeValue(f64),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("no finite Holder exponent: p + q = 0")]
    DegenerateHolderPair,
    #[error("origin is not interior to the body (margin {0})")]
    OriginNotInterior(f64),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("unsupported in dimension {dim}: {what}")]
    UnsupportedDimension { dim: usize, what: &'static str },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate polytope: {0}")]
    Degenerate(&'static str),
    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("bad input file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
