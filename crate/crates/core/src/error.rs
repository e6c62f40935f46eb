use thiserror::Error;

use crate::engine::RunTrace;
use crate::operators::ExtendedPoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("local set of agent {0} is empty")]
    EmptyLocalSet(usize),

    #[error("projection target set is empty (sum of upper bounds {upper_sum} < total {total})")]
    EmptySet { upper_sum: f64, total: f64 },

    #[error("no feasible point found for the coupling constraints (max violation {max_violation:e})")]
    Infeasible { max_violation: f64 },

    #[error("cost of agent {0} provides no gradient oracle for the requested derivative")]
    NonSmoothCost(usize),

    #[error("{what} did not converge within {iters} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iters: usize,
        residual: f64,
    },

    #[error("invalid step sizes: {0}")]
    InvalidStepSizes(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("benchmark generation failed after {attempts} attempts: {reason}")]
    GenerationFailed { attempts: usize, reason: String },

    #[error("reference solution not certified: {0}")]
    NotCertified(String),

    #[error("maximum iterations ({iters}) exceeded")]
    MaxItersExceeded {
        iters: usize,
        trace: Box<RunTrace>,
        point: Box<ExtendedPoint>,
    },

    #[error("malformed game document: {0}")]
    Schema(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
