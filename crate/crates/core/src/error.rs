use thiserror::Error;

/// Errors raised by the algebraic and numerical routines.
///
/// Verification outcomes (monotonicity violations, stability verdicts, ...)
/// are reported as values; this type is reserved for invalid input and
/// numerical breakdown.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("structure constants are not antisymmetric (residual {0:.3e})")]
    Antisymmetry(f64),

    #[error("Jacobi identity violated (residual {0:.3e})")]
    Jacobi(f64),

    #[error("theta is not a homomorphism (residual {0:.3e})")]
    Homomorphism(f64),

    #[error("h is not a subalgebra (residual {0:.3e})")]
    NotSubalgebra(f64),

    #[error("h is not contained in the compactly embedded part k (residual {0:.3e})")]
    IsotropyNotInK(f64),

    #[error("non-reductive decomposition: {0}")]
    NonReductive(String),

    #[error("background metric is not ad(k)-invariant (residual {0:.3e})")]
    BackgroundNotInvariant(f64),

    #[error("matrix is not positive definite (min eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),

    #[error("metric is not ad(h)-equivariant (residual {0:.3e})")]
    NotEquivariant(f64),

    #[error("metric is not theta-adapted (residual {0:.3e})")]
    NotAdapted(f64),

    #[error("representation is not stable: {0}")]
    Unstable(String),

    #[error("algebra is not nilpotent")]
    NotNilpotent,

    #[error("map is not a derivation (residual {0:.3e})")]
    NotDerivation(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
