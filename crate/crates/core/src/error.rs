use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("matrix is not symmetric (asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("projector violates P L P = 0 (norm {norm:.3e})")]
    AssumptionViolated { norm: f64 },

    #[error("step-size guarantee unavailable: symmetric part has min eigenvalue {sym_min_eigenvalue:.3e}")]
    NoStepGuarantee { sym_min_eigenvalue: f64 },

    #[error("explicit Euler step {dt} is unstable (limit {limit:.3e})")]
    UnstableStep { dt: f64, limit: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("particle system diverged at step {step}")]
    Divergence { step: u64 },

    #[error("fixed point not reached after {iterations} iterations (residual {residual:.3e})")]
    FixedPoint { iterations: usize, residual: f64 },

    #[error("profile construction failed at r = {r:.4}: violation {violation:.3e}")]
    Construction { r: f64, violation: f64 },

    #[error("no finite radius: {0}")]
    NoFiniteRadius(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
