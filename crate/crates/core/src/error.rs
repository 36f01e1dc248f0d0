use thiserror::Error;

use crate::fixedpoint::Constraint;

#[derive(Debug, Error)]
pub enum ObssError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("undefined quotient: {0}")]
    UndefinedQuotient(String),

    #[error("CFL violation: dt = {dt:.3e} exceeds the advective limit {limit:.3e}; retry with dt <= {suggested:.3e}")]
    Cfl { dt: f64, limit: f64, suggested: f64 },

    #[error("insufficient statistics: {0}")]
    Statistics(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("numerical breakdown: {0}")]
    Numerical(String),

    #[error("quadrature not resolved: {0}")]
    Resolution(String),

    #[error("Picard iteration diverged (last factors {factors:?}); reduce tau0 below {tau0}")]
    Divergence { factors: Vec<f64>, tau0: f64 },

    #[error("infeasible exponents, violated: {}", .0.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", "))]
    Infeasible(Vec<Constraint>),

    #[error("frame unavailable: {0}")]
    FrameUnavailable(String),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ObssError>;
