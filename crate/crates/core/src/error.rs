use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state space is empty")]
    EmptyStateSpace,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("distribution does not sum to 1 (sum = {sum})")]
    NotNormalized { sum: f64 },

    #[error("distribution entry {index} is invalid ({value})")]
    InvalidMass { index: usize, value: f64 },

    #[error("no mass to normalize: all weights are zero")]
    ZeroMass,

    #[error("Wasserstein exponent must be >= 1, got {0}")]
    InvalidExponent(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid environment: {0}")]
    InvalidEnv(String),

    #[error("invalid state {state}: {reason}")]
    InvalidState { state: usize, reason: &'static str },

    #[error(
        "Sinkhorn did not converge in {iterations} iterations (marginal violation {violation:.3e})"
    )]
    SinkhornNotConverged { iterations: usize, violation: f64 },

    #[error("network simplex exceeded {0} pivots")]
    PivotLimit(usize),

    #[error(
        "power iteration did not converge in {iterations} iterations (residual {residual:.3e})"
    )]
    StationaryNotConverged { iterations: usize, residual: f64 },

    #[error("{context}: {source}")]
    Run {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input (as opposed to solver or I/O failures).
    pub fn is_validation(&self) -> bool {
        match self {
            Error::EmptyStateSpace
            | Error::DimensionMismatch { .. }
            | Error::NotNormalized { .. }
            | Error::InvalidMass { .. }
            | Error::ZeroMass
            | Error::InvalidExponent(_)
            | Error::InvalidConfig(_)
            | Error::InvalidEnv(_)
            | Error::InvalidState { .. }
            | Error::Json(_) => true,
            Error::Run { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
