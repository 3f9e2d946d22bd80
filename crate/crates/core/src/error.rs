use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("degenerate eigenstructure: {0}")]
    Degeneracy(String),

    #[error("ODE step size underflow at t = {t:.6e} (h = {h:.3e})")]
    Stiffness { t: f64, h: f64 },

    #[error("invalid parameter: {0}")]
    Domain(String),

    #[error("ambiguous slow/fast eigenpair partition (margin {margin:.3} < {required})")]
    Partition { margin: f64, required: f64 },

    #[error("reduced eigenvector matrix is singular")]
    Reduction,

    #[error("fit did not converge after {iterations} iterations (residual norm {residual:.3e})")]
    Fit { iterations: usize, residual: f64 },

    #[error("kernel H(τ) relative variation {variation:.3e} exceeds {limit:.1e}")]
    Kernel { variation: f64, limit: f64 },

    #[error("constraint solve failed: {0}")]
    Constraint(String),

    #[error("{failed} of {total} Monte-Carlo evaluations failed (first: {first})")]
    Propagation {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error(
        "quadrature did not converge: estimated error {error:.3e} after {intervals} intervals"
    )]
    Quadrature { error: f64, intervals: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
