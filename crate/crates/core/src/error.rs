use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge after {subdivisions} subdivisions (estimate {estimate:e}, error {error:e})")]
    QuadratureNotConverged {
        subdivisions: usize,
        estimate: f64,
        error: f64,
    },

    #[error("point {point} lies outside the domain {domain}")]
    OutsideDomain { point: f64, domain: String },

    #[error("weight is not positive at {0}")]
    NonPositiveWeight(f64),

    #[error("drift derivative is not positive at {0}")]
    NonMonotoneDrift(f64),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("condition (n-1)K(r)/r^2 <= 1/2 cannot be met on the support: {0}")]
    Unsatisfiable(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
