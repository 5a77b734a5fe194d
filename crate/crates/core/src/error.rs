use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid metric")]
    InvalidMetric,
    #[error("point {0:?} is outside the chart domain")]
    OutsideChart([f64; 4]),
    #[error("singular point")]
    SingularPoint,
    #[error("no smooth extension detected (ray spread {0:e})")]
    NoSmoothExtension(f64),
    #[error("connection {0} has no potential, only a curvature")]
    NoPotential(String),
    #[error("integrand decay insufficient (refinement delta {0:e})")]
    NonConvergence(f64),
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),
    #[error("non-conformal input (spread {0:e})")]
    NonConformal(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed document: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
