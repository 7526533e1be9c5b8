use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("negative component at index {index}: {value}")]
    NegativeComponent { index: usize, value: f64 },

    #[error("operation not supported for this utility family: {0}")]
    UnsupportedFamily(&'static str),

    #[error("degenerate utility for consumer {0}: no nonzero coefficient available")]
    DegenerateUtility(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mixed utility families; pick --mode strong or --mode plc explicitly")]
    MixedFamilies,

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("numerical failure in {what} (best value achieved: {best:?})")]
    NumericalFailure { what: String, best: Option<f64> },

    #[error("internal consistency violation: {0}")]
    Inconsistent(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by malformed or out-of-contract input,
    /// as opposed to solver trouble.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::NegativeComponent { .. }
                | Error::UnsupportedFamily(_)
                | Error::DegenerateUtility(_)
                | Error::InvalidInput(_)
                | Error::MixedFamilies
        )
    }
}
