use thiserror::Error;

/// Errors raised by model evaluation, estimation and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {x} lies outside the domain ({lo}, {hi})")]
    Domain { x: f64, lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("root finding did not converge: {0}")]
    Convergence(String),

    #[error("stationary normalizer diverges: {0}")]
    NonStationary(String),

    #[error("bandwidth must be positive, got {0}")]
    Bandwidth(f64),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("derivative unavailable: {0}")]
    Derivative(String),

    #[error("non-finite likelihood contribution at observation {index}")]
    NonFiniteLikelihood { index: usize },

    #[error("optimizer failed to converge after {restarts} restarts")]
    NonConvergence { restarts: usize },

    #[error("transformation is not monotone on the data range: {0}")]
    Monotonicity(String),

    #[error("singular Hessian in sandwich covariance")]
    SingularHessian,

    #[error("simulated path escaped the domain on {escapes} of {steps} steps")]
    DomainEscape { escapes: usize, steps: usize },

    #[error("model is not serializable: {0}")]
    NotSerializable(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_inside(x: f64, lo: f64, hi: f64) -> Result<()> {
    if x > lo && x < hi {
        Ok(())
    } else {
        Err(Error::Domain { x, lo, hi })
    }
}
