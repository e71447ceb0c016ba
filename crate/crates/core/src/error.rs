use thiserror::Error;

use crate::linalg::LinalgError;
use crate::margins::MarginError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Margin(#[from] MarginError),
    #[error("diagonal entry {index} is not positive ({value})")]
    NonPositiveDiagonal { index: usize, value: f64 },
    #[error("invalid correlation matrix: {0}")]
    InvalidCorrelation(String),
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("degenerate spectrum after {attempts} attempts")]
    DegenerateSpectrum { attempts: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("profile likelihood is higher at both ends of the bracket [{lo}, {hi}] than inside")]
    BracketError { lo: f64, hi: f64 },
}
