//! Data-noise specifications and the operations the refactorization needs from them.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{checked_symmetric, ensure_finite_vector, psd_root, SpdFactor};
use crate::scalar::Scalar;

/// The noise tensor `C` of the data, in whichever form the caller has it.
#[derive(Debug, Clone)]
pub enum NoiseSpec<T: Scalar> {
    /// Dense `N×N` covariance `C`; must be positive definite.
    Covariance(DMatrix<T>),
    /// Dense `N×N` precision `C⁻¹`; non-negative definite. A singular precision
    /// still yields a posterior but no marginalized likelihood.
    Precision(DMatrix<T>),
    /// Diagonal `C` stored as its `N` per-point variances, all strictly positive.
    Variances(DVector<T>),
}

impl<T: Scalar> NoiseSpec<T> {
    /// Diagonal noise from per-point standard deviations.
    pub fn from_sigmas(sigmas: &DVector<T>) -> Self {
        NoiseSpec::Variances(sigmas.map(|s| s * s))
    }

    pub fn len(&self) -> usize {
        match self {
            NoiseSpec::Covariance(m) | NoiseSpec::Precision(m) => m.nrows(),
            NoiseSpec::Variances(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Validates the spec and caches whatever factorization it needs.
    pub fn prepare(&self) -> Result<PreparedNoise<T>> {
        match self {
            NoiseSpec::Covariance(c) => {
                let factor = SpdFactor::new(c, "noise covariance")?;
                Ok(PreparedNoise::Covariance(factor))
            }
            NoiseSpec::Precision(p) => {
                let p = checked_symmetric(p, "noise precision")?;
                if p.diagonal().iter().any(|d| *d < T::zero()) {
                    return Err(Error::InvalidInput(
                        "noise precision has a negative diagonal entry".into(),
                    ));
                }
                let factor = SpdFactor::from_symmetric(p.clone(), "noise precision").ok();
                let root = match &factor {
                    Some(f) => f.lower().transpose(),
                    None => psd_root(&p),
                };
                Ok(PreparedNoise::Precision {
                    precision: p,
                    factor,
                    root,
                })
            }
            NoiseSpec::Variances(v) => {
                ensure_finite_vector(v, "noise variances")?;
                if let Some(i) = v.iter().position(|x| !(*x > T::zero())) {
                    return Err(Error::InvalidInput(format!(
                        "noise variance at index {i} is not strictly positive"
                    )));
                }
                Ok(PreparedNoise::Diagonal(v.clone()))
            }
        }
    }
}

/// A validated noise tensor ready for repeated application of `C⁻¹`.
#[derive(Debug, Clone)]
pub enum PreparedNoise<T: Scalar> {
    Covariance(SpdFactor<T>),
    Precision {
        precision: DMatrix<T>,
        factor: Option<SpdFactor<T>>,
        /// `U` with `Uᵀ·U = C⁻¹`.
        root: DMatrix<T>,
    },
    Diagonal(DVector<T>),
}

impl<T: Scalar> PreparedNoise<T> {
    pub fn len(&self) -> usize {
        match self {
            PreparedNoise::Covariance(f) => f.dim(),
            PreparedNoise::Precision { precision, .. } => precision.nrows(),
            PreparedNoise::Diagonal(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `C⁻¹·x` for a vector.
    pub fn apply_inverse_vec(&self, x: &DVector<T>) -> DVector<T> {
        match self {
            PreparedNoise::Covariance(f) => f.solve_vec(x),
            PreparedNoise::Precision { precision, .. } => precision * x,
            PreparedNoise::Diagonal(v) => x.component_div(v),
        }
    }

    /// `C⁻¹·X` for a matrix with `N` rows.
    pub fn apply_inverse(&self, x: &DMatrix<T>) -> DMatrix<T> {
        match self {
            PreparedNoise::Covariance(f) => f.solve_mat(x),
            PreparedNoise::Precision { precision, .. } => precision * x,
            PreparedNoise::Diagonal(v) => {
                let mut out = x.clone();
                for (mut row, var) in out.row_iter_mut().zip(v.iter()) {
                    row /= *var;
                }
                out
            }
        }
    }

    /// `U·X` for a square root with `Uᵀ·U = C⁻¹`, so `||U·x||² = xᵀ·C⁻¹·x`.
    pub fn whiten(&self, x: &DMatrix<T>) -> DMatrix<T> {
        match self {
            PreparedNoise::Covariance(f) => f.whiten(x),
            PreparedNoise::Precision { root, .. } => root * x,
            PreparedNoise::Diagonal(v) => {
                let mut out = x.clone();
                for (mut row, var) in out.row_iter_mut().zip(v.iter()) {
                    row /= var.sqrt();
                }
                out
            }
        }
    }

    pub fn whiten_vec(&self, x: &DVector<T>) -> DVector<T> {
        let m = self.whiten(&DMatrix::from_column_slice(x.len(), 1, x.as_slice()));
        DVector::from_column_slice(m.as_slice())
    }

    /// `xᵀ·C⁻¹·x`.
    pub fn quad_form(&self, x: &DVector<T>) -> T {
        match self {
            PreparedNoise::Covariance(f) => f.quad_form(x),
            PreparedNoise::Precision { precision, .. } => x.dot(&(precision * x)),
            PreparedNoise::Diagonal(v) => x
                .iter()
                .zip(v.iter())
                .fold(T::zero(), |acc, (xi, vi)| acc + *xi * *xi / *vi),
        }
    }

    /// `ln||C||`; errors when the noise is given as a singular precision.
    pub fn log_det(&self) -> Result<T> {
        match self {
            PreparedNoise::Covariance(f) => Ok(f.log_det()),
            PreparedNoise::Precision { factor, .. } => {
                factor.as_ref().map(|f| -f.log_det()).ok_or(Error::NonPositiveDefinite {
                    what: "noise precision",
                })
            }
            PreparedNoise::Diagonal(v) => Ok(v.iter().fold(T::zero(), |acc, x| acc + x.ln())),
        }
    }

    /// Dense `C`.
    pub fn covariance(&self) -> Result<DMatrix<T>> {
        match self {
            PreparedNoise::Covariance(f) => Ok(f.reconstruct()),
            PreparedNoise::Precision { factor, .. } => {
                factor.as_ref().map(|f| f.inverse()).ok_or(Error::NonPositiveDefinite {
                    what: "noise precision",
                })
            }
            PreparedNoise::Diagonal(v) => Ok(DMatrix::from_diagonal(v)),
        }
    }
}
