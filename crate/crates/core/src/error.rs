use thiserror::Error;

/// Errors raised by the quasinorm library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid exponent {value}: {reason}")]
    InvalidExponent { value: f64, reason: String },

    #[error("exponent split mismatch: sum of 1/p_i is {sum}, expected 1/p = {expected}")]
    SplitMismatch { sum: f64, expected: f64 },

    #[error("inner dimension {d} is smaller than the numerical rank {rank}")]
    InfeasibleDimension { d: usize, rank: usize },

    #[error("unsupported split: {0}")]
    UnsupportedSplit(String),

    #[error("unsupported exponent {0}: must lie in (0, 2]")]
    UnsupportedExponent(f64),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("numerical failure: {message}")]
    NumericalFailure {
        message: String,
        objective_trace: Vec<f64>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid_exponent(value: f64, reason: impl Into<String>) -> Self {
        Error::InvalidExponent {
            value,
            reason: reason.into(),
        }
    }
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Dimension(_) => "dimension",
            Error::InvalidExponent { .. } => "invalid_exponent",
            Error::SplitMismatch { .. } => "split_mismatch",
            Error::InfeasibleDimension { .. } => "infeasible_dimension",
            Error::UnsupportedSplit(_) => "unsupported_split",
            Error::UnsupportedExponent(_) => "unsupported_exponent",
            Error::InvalidProblem(_) => "invalid_problem",
            Error::NumericalFailure { .. } => "numerical_failure",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
