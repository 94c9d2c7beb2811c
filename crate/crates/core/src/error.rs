use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The taming radius came out at or below 2, so the modified drift is not defined for this n.
    #[error("scheme undefined for n = {n}: taming radius {radius} is not greater than 2")]
    SchemeUndefined { n: u64, radius: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{value} is not divisible by {divisor}")]
    NotDivisible { value: u64, divisor: u64 },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
