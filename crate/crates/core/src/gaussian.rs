//! Multivariate Gaussians in moment `(m, V)` and canonical `(H, η, ξ)` form,
//! plus the Cholesky-backed factor every other module solves against.
//!
//! No routine here forms an explicit inverse to evaluate a density. The
//! normalizer `ln||2πV||` is computed as `d·ln(2π) + ln||V||`, so it never
//! refers to the dimension of the space beyond that count.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::{ln_two_pi, Scalar};

/// Relative asymmetry above which a supposedly symmetric tensor is rejected.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Largest absolute entry of `m - mᵀ` relative to the largest absolute entry of `m`.
pub fn relative_asymmetry<T: Scalar>(m: &DMatrix<T>) -> f64 {
    let n = m.nrows();
    let mut scale = 0.0f64;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            scale = scale.max(m[(i, j)].as_f64().abs());
            if j > i {
                worst = worst.max((m[(i, j)] - m[(j, i)]).as_f64().abs());
            }
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// `(m + mᵀ) / 2`.
pub fn symmetrize<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::lit(0.5)
}

pub(crate) fn ensure_finite_matrix<T: Scalar>(m: &DMatrix<T>, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what })
    }
}

pub(crate) fn ensure_finite_vector<T: Scalar>(v: &DVector<T>, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what })
    }
}

/// Validates squareness, finiteness and symmetry, returning the symmetrized tensor.
pub(crate) fn checked_symmetric<T: Scalar>(m: &DMatrix<T>, what: &'static str) -> Result<DMatrix<T>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: what,
            expected: m.nrows(),
            actual: m.ncols(),
        });
    }
    ensure_finite_matrix(m, what)?;
    let asymmetry = relative_asymmetry(m);
    if asymmetry > SYMMETRY_TOLERANCE {
        return Err(Error::Asymmetric { what, asymmetry });
    }
    Ok(symmetrize(m))
}

/// `S` with `Sᵀ·S = m` for a symmetric non-negative definite `m`, from its
/// eigendecomposition with negative rounding noise clipped to zero.
pub(crate) fn psd_root<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let eig = m.clone().symmetric_eigen();
    let scale = eig.eigenvalues.map(|l| l.max(T::zero()).sqrt());
    DMatrix::from_diagonal(&scale) * eig.eigenvectors.transpose()
}

/// Cholesky factorization of a symmetric positive-definite tensor.
///
/// Supports solving against vectors and matrices, the log-determinant, and the
/// quadratic form `xᵀ·V⁻¹·x` through a single triangular solve.
#[derive(Debug, Clone)]
pub struct SpdFactor<T: Scalar> {
    lower: DMatrix<T>,
}

impl<T: Scalar> SpdFactor<T> {
    /// Factors `m` after checking that it is square, finite and symmetric.
    ///
    /// `what` names the tensor in error messages.
    pub fn new(m: &DMatrix<T>, what: &'static str) -> Result<Self> {
        let sym = checked_symmetric(m, what)?;
        Self::from_symmetric(sym, what)
    }

    /// Factors a tensor the caller has already symmetrized.
    pub(crate) fn from_symmetric(sym: DMatrix<T>, what: &'static str) -> Result<Self> {
        let chol = Cholesky::new(sym).ok_or(Error::NonPositiveDefinite { what })?;
        Self::from_lower(chol.unpack(), what)
    }

    /// Wraps a lower-triangular `L` computed elsewhere, e.g. from a QR factorization.
    pub(crate) fn from_lower(lower: DMatrix<T>, what: &'static str) -> Result<Self> {
        if lower.diagonal().iter().any(|d| !(*d > T::zero()) || !d.is_finite()) {
            return Err(Error::NonPositiveDefinite { what });
        }
        Ok(Self { lower })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// Lower-triangular `L` with `V = L·Lᵀ`.
    pub fn lower(&self) -> &DMatrix<T> {
        &self.lower
    }

    pub fn solve_vec(&self, x: &DVector<T>) -> DVector<T> {
        let mut z = x.clone();
        self.lower.solve_lower_triangular_mut(&mut z);
        self.lower.tr_solve_lower_triangular_mut(&mut z);
        z
    }

    pub fn solve_mat(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let mut z = x.clone();
        self.lower.solve_lower_triangular_mut(&mut z);
        self.lower.tr_solve_lower_triangular_mut(&mut z);
        z
    }

    /// `L⁻¹·x`, so that `||L⁻¹·x||² = xᵀ·V⁻¹·x`.
    pub fn whiten(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let mut z = x.clone();
        self.lower.solve_lower_triangular_mut(&mut z);
        z
    }

    /// `ln||V||`.
    pub fn log_det(&self) -> T {
        self.lower.diagonal().iter().fold(T::zero(), |acc, d| acc + d.ln()) * T::lit(2.0)
    }

    /// `xᵀ·V⁻¹·x` computed as `||L⁻¹·x||²`.
    pub fn quad_form(&self, x: &DVector<T>) -> T {
        let z = self
            .lower
            .solve_lower_triangular(x)
            .expect("Cholesky factor has a positive diagonal");
        z.norm_squared()
    }

    /// `xᵀ·V·x` computed as `||Lᵀ·x||²`.
    pub fn direct_quad_form(&self, x: &DVector<T>) -> T {
        (self.lower.transpose() * x).norm_squared()
    }

    /// Materialized `V⁻¹`, symmetrized.
    pub fn inverse(&self) -> DMatrix<T> {
        symmetrize(&self.solve_mat(&DMatrix::identity(self.dim(), self.dim())))
    }

    /// Reassembled `V = L·Lᵀ`.
    pub fn reconstruct(&self) -> DMatrix<T> {
        &self.lower * self.lower.transpose()
    }
}

/// A multivariate Gaussian in moment form: mean vector and covariance tensor.
///
/// Construction accepts a covariance that is not positive definite; density
/// evaluation, sampling and conversion on such a value return
/// [`Error::NonPositiveDefinite`].
#[derive(Debug, Clone)]
pub struct GaussianMoment<T: Scalar> {
    mean: DVector<T>,
    cov: DMatrix<T>,
    factor: Option<SpdFactor<T>>,
    precision: Option<SpdFactor<T>>,
}

impl<T: Scalar> GaussianMoment<T> {
    pub fn new(mean: DVector<T>, cov: DMatrix<T>) -> Result<Self> {
        check_dim("covariance rows vs mean length", mean.len(), cov.nrows())?;
        ensure_finite_vector(&mean, "mean")?;
        let cov = checked_symmetric(&cov, "covariance")?;
        let factor = SpdFactor::from_symmetric(cov.clone(), "covariance").ok();
        Ok(Self {
            mean,
            cov,
            factor,
            precision: None,
        })
    }

    pub(crate) fn from_factor(mean: DVector<T>, cov: DMatrix<T>, factor: SpdFactor<T>) -> Self {
        Self {
            mean,
            cov,
            factor: Some(factor),
            precision: None,
        }
    }

    /// Builds `N(m, P⁻¹)` from a factored precision `P`.
    ///
    /// Densities are then evaluated from `P` itself, which stays accurate when
    /// `P` is badly conditioned and the inverted covariance would not be.
    pub(crate) fn from_precision(mean: DVector<T>, precision: SpdFactor<T>, what: &'static str) -> Result<Self> {
        let cov = precision.inverse();
        let factor = SpdFactor::from_symmetric(cov.clone(), what)?;
        Ok(Self {
            mean,
            cov,
            factor: Some(factor),
            precision: Some(precision),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<T> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<T> {
        &self.cov
    }

    pub fn is_positive_definite(&self) -> bool {
        self.factor.is_some()
    }

    pub fn factor(&self) -> Result<&SpdFactor<T>> {
        self.factor
            .as_ref()
            .ok_or(Error::NonPositiveDefinite { what: "covariance" })
    }

    /// `ln||2πV||`.
    pub fn log_norm(&self) -> Result<T> {
        let log_det = match &self.precision {
            Some(p) => -p.log_det(),
            None => self.factor()?.log_det(),
        };
        Ok(T::lit(self.dim() as f64) * ln_two_pi::<T>() + log_det)
    }

    /// `ln N(x | m, V)`.
    pub fn log_pdf(&self, x: &DVector<T>) -> Result<T> {
        check_dim("log_pdf point", self.dim(), x.len())?;
        let r = x - &self.mean;
        let quad = match &self.precision {
            Some(p) => p.direct_quad_form(&r),
            None => self.factor()?.quad_form(&r),
        };
        let half = T::lit(0.5);
        Ok(-half * self.log_norm()? - half * quad)
    }

    pub fn to_canonical(&self) -> Result<GaussianCanonical<T>> {
        let f = self.factor()?;
        let precision = f.inverse();
        let eta = f.solve_vec(&self.mean);
        let xi = self.log_norm()? + eta.dot(&self.mean);
        Ok(GaussianCanonical { precision, eta, xi })
    }

    /// `n` draws as the rows of an `n×d` matrix, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<DMatrix<T>> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        self.sample_with(&mut rng, n)
    }

    /// `n` draws `m + L·z` using the caller's generator.
    pub fn sample_with<R: rand::Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<DMatrix<T>> {
        if n == 0 {
            return Err(Error::InvalidInput("sample count must be at least 1".into()));
        }
        let f = self.factor()?;
        let d = self.dim();
        let mut out = DMatrix::zeros(n, d);
        let mut z = DVector::zeros(d);
        for row in 0..n {
            for zi in z.iter_mut() {
                *zi = T::standard_normal(rng);
            }
            let draw = &self.mean + f.lower() * &z;
            out.row_mut(row).copy_from(&draw.transpose());
        }
        Ok(out)
    }
}

/// Canonical (exponential-family) form of a Gaussian:
/// `ln N(x) = −½·xᵀ·H·x + ηᵀ·x − ½·ξ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianCanonical<T: Scalar> {
    pub precision: DMatrix<T>,
    pub eta: DVector<T>,
    pub xi: T,
}

impl<T: Scalar> GaussianCanonical<T> {
    pub fn new(precision: DMatrix<T>, eta: DVector<T>, xi: T) -> Result<Self> {
        check_dim("precision rows vs eta length", eta.len(), precision.nrows())?;
        ensure_finite_vector(&eta, "eta")?;
        let precision = checked_symmetric(&precision, "precision")?;
        Ok(Self { precision, eta, xi })
    }

    pub fn from_moment(g: &GaussianMoment<T>) -> Result<Self> {
        g.to_canonical()
    }

    pub fn dim(&self) -> usize {
        self.eta.len()
    }

    /// Evaluates `−½·xᵀ·H·x + ηᵀ·x − ½·ξ`.
    pub fn log_density(&self, x: &DVector<T>) -> Result<T> {
        check_dim("canonical log density point", self.dim(), x.len())?;
        let half = T::lit(0.5);
        Ok(-half * x.dot(&(&self.precision * x)) + self.eta.dot(x) - half * self.xi)
    }

    /// Recovers `(m, V) = (H⁻¹·η, H⁻¹)`.
    pub fn to_moment(&self) -> Result<GaussianMoment<T>> {
        let f = SpdFactor::from_symmetric(self.precision.clone(), "precision")?;
        let mean = f.solve_vec(&self.eta);
        GaussianMoment::from_precision(mean, f, "covariance")
    }
}
