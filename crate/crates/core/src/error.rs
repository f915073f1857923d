use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        actual: usize,
    },
    #[error("stage {stage} out of range for horizon {horizon}")]
    StageOutOfRange { stage: usize, horizon: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("trajectory violates the dynamics at stage {stage} (residual {residual:e})")]
    InfeasibleTrajectory { stage: usize, residual: f64 },
    #[error("singular {what} at stage {stage}")]
    Singular { what: String, stage: usize },
    #[error("constraint matrix is rank deficient at stage {stage}")]
    RankDeficient { stage: usize },
    #[error("constraint set appears infeasible (max violation {max_violation:e})")]
    Infeasible { max_violation: f64 },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        what: String,
        iterations: usize,
        residual: f64,
    },
    #[error("iteration diverged at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(what: impl Into<String>, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what: what.into(),
            expected,
            actual,
        })
    }
}
