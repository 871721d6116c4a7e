use thiserror::Error;

use crate::inclusion::SolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("inclusion solver did not converge after {} iterations (last residual {:.3e})", .report.iterations, .report.last_residual())]
    NonConvergence { report: Box<SolveReport> },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("step {step} failed: {source}")]
    StepFailure {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("time {t} outside [0, {t_final}]")]
    Domain { t: f64, t_final: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
