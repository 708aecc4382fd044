use thiserror::Error;

use crate::fit::FitResult;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("interval [{u}, {v}] is outside the path domain [{lo}, {hi}]")]
    OutOfRange { u: f64, v: f64, lo: f64, hi: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("non-finite value at step {step}")]
    NonFinite { step: usize },

    /// The iterative solver hit its iteration cap; the best iterate found is attached.
    #[error("best approximation did not converge after {} iterations (delta {})", .best.iterations, .best.delta)]
    NotConverged { best: Box<FitResult> },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numerics (as opposed to bad arguments).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NumericFailure(_) | Error::NonFinite { .. } | Error::NotConverged { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
