use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point outside domain: {0}")]
    OutsideDomain(String),
    #[error("moment of order {0} is infinite")]
    MomentNotFinite(u32),
    #[error("quadrature did not reach tolerance (relative error {rel_err:.3e})")]
    QuadratureFailure { rel_err: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),
    #[error("tail fit failed: {0}")]
    FitError(String),
    #[error("tail evaluator is not positive at y = {0}")]
    NonPositiveTail(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
