use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{what} is not positive definite")]
    NonPositiveDefinite { what: &'static str },

    #[error("{what} is not symmetric (relative asymmetry {asymmetry:e})")]
    Asymmetric { what: &'static str, asymmetry: f64 },

    #[error("posterior precision is singular: prior precision plus data precision failed Cholesky")]
    SingularPosterior,

    #[error("marginalized likelihood is undefined for an improper prior")]
    ImproperMarginal,

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("{0}")]
    InvalidInput(String),

    #[error("invalid polynomial degree {0}")]
    InvalidDegree(i64),

    #[error("invalid frequency {0}: must be positive and finite")]
    InvalidFrequency(f64),

    #[error("invalid prior domain ({lo}, {hi}): need 0 < lo < hi")]
    InvalidDomain { lo: f64, hi: f64 },

    #[error("every frequency-scan value is -inf")]
    DegenerateScan,

    #[error("rejection sampler exceeded {proposals} proposals with {accepted} of {requested} accepted")]
    EnvelopeTooLoose {
        proposals: u64,
        accepted: usize,
        requested: usize,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
