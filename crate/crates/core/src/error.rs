use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid order {order}: {reason}")]
    InvalidOrder { order: usize, reason: &'static str },

    #[error("ill-conditioned Chebyshev transform (C = {order}, condition estimate {condition:.3e})")]
    Conditioning { order: usize, condition: f64 },

    #[error("AFT sampling violates Nyquist: N_aft = {n_aft} must exceed 2 * {h_out}")]
    Aliasing { n_aft: usize, h_out: usize },

    #[error("Newton iteration diverged after {iterations} iterations (residual {residual:.3e})")]
    Divergence { iterations: usize, residual: f64 },

    #[error("singular matrix in {context}")]
    Singular { context: &'static str },

    #[error("matrix exponential out of numerical range")]
    NumericalRange,

    #[error("eigenvalue iteration did not converge")]
    EigenNonConvergence,

    #[error("shooting failed to close the orbit after {iterations} iterations (defect {defect:.3e})")]
    ShootingDivergence { iterations: usize, defect: f64 },

    #[error("higher-harmonic coverage insufficient: H+ = {h_plus} but the force reaches harmonic {required}")]
    Coverage { h_plus: usize, required: usize },

    #[error("Floquet multiplier at +1 (distance {distance:.3e}); I - Phi(2pi) is singular")]
    SingularResolvent { distance: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("finite element assembly failed: {0}")]
    Assembly(String),

    #[error("continuation could not start: {0}")]
    StartPoint(Box<Error>),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
