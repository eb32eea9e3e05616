use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument {z} is outside the analyticity strip ({lo}, {hi})")]
    Domain { z: f64, lo: f64, hi: f64 },

    #[error("no admissible exponent on the search grid: {0}")]
    NotAdmissible(String),

    #[error("root residual {residual:e} exceeds tolerance {tolerance:e} ({which})")]
    RootResidual {
        which: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("threshold equation did not converge after {0} iterations")]
    IterationLimit(usize),

    #[error("degenerate coefficient denominator {0:e}")]
    DegenerateDenominator(f64),

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("invalid simulation config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
