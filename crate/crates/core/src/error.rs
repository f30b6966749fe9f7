use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("objective is not strictly convex: {0}")]
    NotStrictlyConvex(String),

    /// The solver ran out of iterations. Carries the best iterate seen and
    /// its stationarity residual so callers can inspect or resume.
    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64, best: Vec<f64> },

    #[error("enumeration of {count} subsets exceeds the cap of {cap}")]
    CapExceeded { count: u128, cap: u128 },

    #[error("no group selected: {0}")]
    NoSelection(String),

    #[error("unrestricted optimum reached; nothing left to select")]
    OptimumReached,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by malformed input rather than numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::InvalidPartition(_)
                | Error::InvalidArgument(_)
                | Error::NotStrictlyConvex(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
