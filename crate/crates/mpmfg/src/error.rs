use thiserror::Error;

/// Errors produced by the toolkit.
///
/// Non-convergence of iterative solvers is deliberately *not* an error; those
/// return flagged results (see [`crate::population::FixedPoint`]) so the
/// caller can decide.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("population {0} has no agents")]
    EmptyPopulation(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
