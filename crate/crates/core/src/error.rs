use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("operator is not surjective: lambda_min(AA^T) = {min_eig:e} with ||A||^2 = {norm_sq:e}")]
    NotSurjective { min_eig: f64, norm_sq: f64 },

    #[error("admissible tau interval is empty ({lo} >= {hi})")]
    EmptyInterval { lo: f64, hi: f64 },

    #[error("numerical divergence in block `{block}` at iteration {iteration}")]
    NumericalDivergence { block: &'static str, iteration: usize },

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("sequence too short: {got} usable points, need at least {need}")]
    TooShort { got: usize, need: usize },

    #[error("run has not converged: max step norm {max_step:e} exceeds tolerance {tol:e}")]
    NotConverged { max_step: f64, tol: f64 },

    #[error("oracle grid has {points} points, limit is {limit}")]
    GridTooLarge { points: f64, limit: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            got,
        })
    }
}
