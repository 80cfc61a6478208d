use thiserror::Error;

use crate::grid::Domain;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{quantity} = {value} is outside the allowed range [{min}, {max}]")]
    OutOfRange { quantity: &'static str, value: f64, min: f64, max: f64 },

    #[error("expected a {expected:?}-domain grid, got {found:?}")]
    Domain { expected: Domain, found: Domain },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("insufficient grid resolution: {0}")]
    Resolution(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("width not measurable: {0}")]
    NotMeasurable(String),

    #[error("fit failed after {iterations} iterations: {reason}")]
    FitFailure { reason: String, iterations: usize },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),
}
