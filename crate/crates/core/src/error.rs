use thiserror::Error;

/// Errors raised by the measure, dilation and certification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OvmError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("malformed matrix: {0}")]
    MalformedMatrix(String),

    #[error("eigensolver did not converge for a {dim}x{dim} matrix with Frobenius norm {norm:e}")]
    EigenNonConvergence { dim: usize, norm: f64 },

    #[error("eigenvalue {eigenvalue:e} lies outside the function domain [{lo}, {hi}]")]
    DomainViolation { eigenvalue: f64, lo: f64, hi: f64 },

    #[error("effect at support point {lambda} is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    EffectNotPsd { lambda: f64, min_eigenvalue: f64 },

    #[error("measure is not normalized: normalization defect {} (spectral norm of the effect sum minus the identity)", significant(*.defect))]
    NotNormalized { defect: f64 },

    #[error("support point {0} is negative; real moments need support in [0, inf)")]
    NegativeSupport(f64),

    #[error("exponent {0} is outside the supported range [0, 64]")]
    ExponentOutOfRange(f64),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "no counterexample exists for (p, q) = ({p}, {q}): with p < q, p odd and q even, \
         matching p-th and q-th moments force the measure to be the spectral measure of T"
    )]
    PairInOmega { p: u32, q: u32 },

    #[error("bisection failed: {0}")]
    Bisection(String),

    #[error("operator is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("operator is not a contraction (spectral norm {0})")]
    NotContraction(f64),

    #[error("operator is not an orthogonal projection (idempotency defect {0:e})")]
    NotProjection(f64),

    #[error("embedding is not an isometry (defect {0:e})")]
    NotIsometry(f64),
}

pub type Result<T> = std::result::Result<T, OvmError>;

/// `x` rounded to six significant digits, so that `0.0999...98` reads `0.1`.
fn significant(x: f64) -> f64 {
    format!("{x:.5e}").parse().unwrap_or(x)
}
