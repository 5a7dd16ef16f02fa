use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("point is not in the upper half-plane (min eigenvalue of Im z = {min_imag:e})")]
    NotInUpperHalfPlane { min_imag: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular matrix encountered: {0}")]
    Singular(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("boundary extrapolation did not settle: successive estimates differ by {spread:e}")]
    Extrapolation { spread: f64 },

    #[error("generic kernel rank could not be determined: {0}")]
    GenericRank(String),

    #[error("polynomial parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("linear algebra failure: {0}")]
    LinAlg(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
