//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by the construction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("singular point: {0}")]
    SingularPoint(String),
    #[error("integration failure: energy drift {drift:e} exceeds tolerance {tol:e}")]
    IntegrationFailure { drift: f64, tol: f64 },
    #[error("quadrature did not converge: last refinements {last} and {previous}")]
    QuadratureNonConvergence { last: f64, previous: f64 },
    #[error("root finding did not converge: {0}")]
    RootNotFound(String),
    #[error("balancing system has no admissible solution: {0}")]
    NoBalancingSolution(String),
    #[error("configuration infeasible: {0}")]
    Infeasible(String),
    #[error("ill-conditioned problem: {0}")]
    Conditioning(String),
    #[error("iteration not contractive: measured factor {factor:.3e} ({context})")]
    NonContractive { factor: f64, context: String },
    #[error("left the contraction ball: norm {norm:.3e} exceeds radius {radius:.3e}")]
    BallExit { norm: f64, radius: f64 },
    #[error("positivity violated: {0}")]
    Positivity(String),
    #[error("orbit does not cover t = {0}")]
    OrbitCoverage(f64),
    #[error("nonlinear solve failed: {0}")]
    Solve(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
