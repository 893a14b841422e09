use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid space parameters: {0}")]
    InvalidSpace(String),

    #[error("point ({x}, {y}, {z}) lies outside the chart domain")]
    OutsideChart { x: f64, y: f64, z: f64 },

    #[error("operation requires the Heisenberg space (kappa = 0, tau != 0), got kappa = {kappa}, tau = {tau}")]
    UnsupportedSpace { kappa: f64, tau: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("degenerate immersion at ({s}, {t}): singular values {singular_values:?}")]
    Degenerate {
        s: f64,
        t: f64,
        singular_values: [f64; 2],
    },

    #[error("curve leaves the chart: {0}")]
    ChartExit(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("under-resolved: {0}")]
    Resolution(String),

    #[error("solver did not converge after {iterations} iterations (last residual {last_residual:e})")]
    NoConvergence {
        iterations: usize,
        last_residual: f64,
        history: Vec<f64>,
    },

    #[error("singular matrix at pivot {0}")]
    Singular(usize),

    #[error("matrix is not positive definite (pivot {0})")]
    NotPositiveDefinite(usize),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
