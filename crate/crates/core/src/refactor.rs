//! Refactorization of a linear-Gaussian likelihood times a Gaussian prior:
//!
//! ```text
//! N(y | M·θ, C) · N(θ | μ, Λ) = N(θ | a, A) · N(y | b, B)
//!
//! A⁻¹ = Λ⁻¹ + Mᵀ·C⁻¹·M        a = A·(Λ⁻¹·μ + Mᵀ·C⁻¹·y)
//! B   = C + M·Λ·Mᵀ             b = M·μ
//! ```
//!
//! The prior is given either as a covariance `Λ` or as a precision `Λ⁻¹`; the
//! infinitely wide prior is the all-zero precision. In that case the posterior
//! is still returned but the marginalized likelihood is reported as
//! [`LogMarginal::Undefined`].
//!
//! `a` and the Cholesky factor of `A⁻¹` come from a QR factorization of the
//! whitened design stacked on a square root of `Λ⁻¹`, never from the normal
//! equations, so ill-conditioned priors and noise lose as few digits as possible.
//!
//! `B⁻¹` is applied with the matrix inversion lemma and `ln||B||` comes from the
//! matrix determinant lemma whenever `K < N`, so that case costs `O(K³)` beyond
//! the products with `C⁻¹`. For `K ≥ N` the dense `N×N` tensor `B` is formed and
//! factored instead. Both paths are selectable through [`refactor_in`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gaussian::{
    checked_symmetric, ensure_finite_matrix, ensure_finite_vector, psd_root, symmetrize, GaussianMoment, SpdFactor,
};
use crate::noise::{NoiseSpec, PreparedNoise};
use crate::scalar::{ln_two_pi, Scalar};

/// Relative tolerance on negative eigenvalues when accepting a singular prior precision.
const NND_TOLERANCE: f64 = 1e-10;

/// Which space `B⁻¹` and `ln||B||` are evaluated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationSpace {
    /// `K×K` work through the inversion and determinant lemmas.
    Parameter,
    /// Dense `N×N` tensor `B`.
    Data,
}

impl EvaluationSpace {
    /// `Parameter` exactly when `K < N`.
    pub fn choose(n: usize, k: usize) -> Self {
        if k < n {
            EvaluationSpace::Parameter
        } else {
            EvaluationSpace::Data
        }
    }
}

/// `ln N(y | b, B)`, or a typed marker when the prior is improper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum LogMarginal<T> {
    Defined(T),
    Undefined,
}

impl<T: Copy> LogMarginal<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            LogMarginal::Defined(v) => Some(*v),
            LogMarginal::Undefined => None,
        }
    }

    pub fn is_defined(&self) -> bool {
        matches!(self, LogMarginal::Defined(_))
    }

    pub fn into_result(self) -> Result<T> {
        self.value().ok_or(Error::ImproperMarginal)
    }
}

/// Gaussian prior on the linear parameters.
///
/// A prior given as a covariance keeps that covariance, so models built from it
/// never work with an explicitly inverted `Λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPrior<T: Scalar> {
    mean: DVector<T>,
    precision: DMatrix<T>,
    covariance: Option<DMatrix<T>>,
}

impl<T: Scalar> LinearPrior<T> {
    /// Independent components with the given variances (the diagonal of `Λ`).
    pub fn from_variances(mean: DVector<T>, variances: &DVector<T>) -> Result<Self> {
        check_dim("prior variances vs prior mean", mean.len(), variances.len())?;
        if let Some(i) = variances.iter().position(|v| !(*v > T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "prior variance at index {i} must be positive and finite"
            )));
        }
        Ok(Self {
            mean,
            precision: DMatrix::from_diagonal(&variances.map(|v| v.recip())),
            covariance: Some(DMatrix::from_diagonal(variances)),
        })
    }

    /// From a full positive-definite covariance `Λ`.
    pub fn from_covariance(mean: DVector<T>, cov: &DMatrix<T>) -> Result<Self> {
        check_dim("prior covariance vs prior mean", mean.len(), cov.nrows())?;
        let cov = checked_symmetric(cov, "prior covariance")?;
        let f = SpdFactor::from_symmetric(cov.clone(), "prior covariance")?;
        Ok(Self {
            mean,
            precision: f.inverse(),
            covariance: Some(cov),
        })
    }

    /// From a precision `Λ⁻¹`, which may be singular.
    pub fn from_precision(mean: DVector<T>, precision: DMatrix<T>) -> Result<Self> {
        check_dim("prior precision vs prior mean", mean.len(), precision.nrows())?;
        Ok(Self {
            mean,
            precision,
            covariance: None,
        })
    }

    /// Zero precision: the infinitely wide prior.
    pub fn improper(k: usize) -> Self {
        Self {
            mean: DVector::zeros(k),
            precision: DMatrix::zeros(k, k),
            covariance: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<T> {
        &self.mean
    }

    pub fn precision(&self) -> &DMatrix<T> {
        &self.precision
    }

    /// `Λ`, when the prior was given in covariance form.
    pub fn covariance(&self) -> Option<&DMatrix<T>> {
        self.covariance.as_ref()
    }
}

/// Square roots of the prior: `Sᵀ·S = Λ⁻¹` always, and `G·Gᵀ = Λ` together
/// with `ln||Λ⁻¹||` when the prior is proper.
#[derive(Debug, Clone)]
struct PriorRoots<T: Scalar> {
    precision_root: DMatrix<T>,
    proper: Option<(DMatrix<T>, T)>,
}

impl<T: Scalar> PriorRoots<T> {
    fn from_precision(p: &DMatrix<T>) -> Result<Self> {
        let k = p.nrows();
        if p.iter().all(|v| *v == T::zero()) {
            return Ok(Self {
                precision_root: DMatrix::zeros(k, k),
                proper: None,
            });
        }
        if let Ok(f) = SpdFactor::from_symmetric(p.clone(), "prior precision") {
            let r = f.lower();
            let cov_root = triangular_inverse(r).transpose();
            return Ok(Self {
                precision_root: r.transpose(),
                proper: Some((cov_root, f.log_det())),
            });
        }
        let eig = p.clone().symmetric_eigen();
        let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.as_f64().abs()));
        let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.as_f64()));
        if min < -NND_TOLERANCE * scale {
            return Err(Error::InvalidInput(format!(
                "prior precision is not non-negative definite (minimum eigenvalue {min:e})"
            )));
        }
        Ok(Self {
            precision_root: psd_root(p),
            proper: None,
        })
    }

    fn from_covariance(cov: &DMatrix<T>) -> Result<Self> {
        let f = SpdFactor::new(cov, "prior covariance")?;
        Ok(Self {
            precision_root: triangular_inverse(f.lower()),
            proper: Some((f.lower().clone(), -f.log_det())),
        })
    }
}

/// `L⁻¹` for a lower-triangular `L` with a positive diagonal.
fn triangular_inverse<T: Scalar>(l: &DMatrix<T>) -> DMatrix<T> {
    let mut inv = DMatrix::identity(l.nrows(), l.ncols());
    l.solve_lower_triangular_mut(&mut inv);
    inv
}

/// Linear model `y = M·θ + noise` with a Gaussian prior on `θ`.
#[derive(Debug, Clone)]
pub struct LinearGaussianModel<T: Scalar> {
    design: DMatrix<T>,
    noise: PreparedNoise<T>,
    prior_mean: DVector<T>,
    prior_precision: DMatrix<T>,
    prior: PriorRoots<T>,
}

impl<T: Scalar> LinearGaussianModel<T> {
    /// Builds a model from the design `M` (N×K), the noise, the prior mean `μ`
    /// and the prior precision `Λ⁻¹`, which must be symmetric non-negative definite.
    pub fn new(
        design: DMatrix<T>,
        noise: NoiseSpec<T>,
        prior_mean: DVector<T>,
        prior_precision: DMatrix<T>,
    ) -> Result<Self> {
        check_dim(
            "prior precision size vs design columns",
            design.ncols(),
            prior_precision.nrows(),
        )?;
        let prior_precision = checked_symmetric(&prior_precision, "prior precision")?;
        let prior = PriorRoots::from_precision(&prior_precision)?;
        Self::assemble(design, noise, prior_mean, prior_precision, prior)
    }

    pub fn from_prior(design: DMatrix<T>, noise: NoiseSpec<T>, prior: &LinearPrior<T>) -> Result<Self> {
        match prior.covariance() {
            Some(cov) => Self::with_prior_covariance(design, noise, prior.mean().clone(), cov),
            None => Self::new(design, noise, prior.mean().clone(), prior.precision().clone()),
        }
    }

    /// Builds a model from a positive-definite prior covariance `Λ`.
    pub fn with_prior_covariance(
        design: DMatrix<T>,
        noise: NoiseSpec<T>,
        prior_mean: DVector<T>,
        prior_cov: &DMatrix<T>,
    ) -> Result<Self> {
        check_dim(
            "prior covariance size vs design columns",
            design.ncols(),
            prior_cov.nrows(),
        )?;
        let prior = PriorRoots::from_covariance(prior_cov)?;
        let prior_precision = symmetrize(&(prior.precision_root.transpose() * &prior.precision_root));
        Self::assemble(design, noise, prior_mean, prior_precision, prior)
    }

    /// The infinitely wide prior: `Λ⁻¹ = 0`.
    pub fn with_improper_prior(design: DMatrix<T>, noise: NoiseSpec<T>) -> Result<Self> {
        let k = design.ncols();
        Self::new(design, noise, DVector::zeros(k), DMatrix::zeros(k, k))
    }

    fn assemble(
        design: DMatrix<T>,
        noise: NoiseSpec<T>,
        prior_mean: DVector<T>,
        prior_precision: DMatrix<T>,
        prior: PriorRoots<T>,
    ) -> Result<Self> {
        let (n, k) = design.shape();
        if n == 0 || k == 0 {
            return Err(Error::InvalidInput(format!(
                "design matrix must be at least 1x1, got {n}x{k}"
            )));
        }
        ensure_finite_matrix(&design, "design matrix")?;
        ensure_finite_vector(&prior_mean, "prior mean")?;
        check_dim("noise size vs design rows", n, noise.len())?;
        check_dim("prior mean length vs design columns", k, prior_mean.len())?;
        let noise = noise.prepare()?;
        Ok(Self {
            design,
            noise,
            prior_mean,
            prior_precision,
            prior,
        })
    }

    pub fn n_data(&self) -> usize {
        self.design.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.design.ncols()
    }

    pub fn design(&self) -> &DMatrix<T> {
        &self.design
    }

    pub fn noise(&self) -> &PreparedNoise<T> {
        &self.noise
    }

    pub fn prior_mean(&self) -> &DVector<T> {
        &self.prior_mean
    }

    pub fn prior_precision(&self) -> &DMatrix<T> {
        &self.prior_precision
    }

    /// Whether `Λ⁻¹` is positive definite, i.e. the prior is a normalizable density.
    pub fn is_proper(&self) -> bool {
        self.prior.proper.is_some()
    }

    fn proper_roots(&self) -> Result<&(DMatrix<T>, T)> {
        self.prior.proper.as_ref().ok_or(Error::ImproperMarginal)
    }

    /// The prior as a moment-form Gaussian `N(θ | μ, Λ)`.
    pub fn prior(&self) -> Result<GaussianMoment<T>> {
        let (g, _) = self.proper_roots()?;
        GaussianMoment::new(self.prior_mean.clone(), symmetrize(&(g * g.transpose())))
    }

    /// Dense `B = C + M·Λ·Mᵀ`; only exists for a proper prior.
    pub fn b_covariance(&self) -> Result<DMatrix<T>> {
        let (g, _) = self.proper_roots()?;
        let mg = &self.design * g;
        Ok(symmetrize(&(self.noise.covariance()? + &mg * mg.transpose())))
    }

    /// `ln N(y | M·θ, C)`.
    pub fn log_likelihood(&self, theta: &DVector<T>, y: &DVector<T>) -> Result<T> {
        check_dim("theta length", self.n_params(), theta.len())?;
        check_dim("data length", self.n_data(), y.len())?;
        let r = y - &self.design * theta;
        let quad = self.noise.quad_form(&r);
        let half = T::lit(0.5);
        let log_norm = T::lit(self.n_data() as f64) * ln_two_pi::<T>() + self.noise.log_det()?;
        Ok(-half * log_norm - half * quad)
    }

    /// `ln N(θ | μ, Λ)`; errors for an improper prior.
    pub fn log_prior(&self, theta: &DVector<T>) -> Result<T> {
        check_dim("theta length", self.n_params(), theta.len())?;
        let (_, log_det_precision) = self.proper_roots()?;
        let quad = (&self.prior.precision_root * (theta - &self.prior_mean)).norm_squared();
        let half = T::lit(0.5);
        let log_norm = T::lit(self.n_params() as f64) * ln_two_pi::<T>() - *log_det_precision;
        Ok(-half * log_norm - half * quad)
    }

    /// Factor of `A⁻¹` and the mean `a`, from a QR factorization of the stacked
    /// whitened system `[U·M; S]` with `Uᵀ·U = C⁻¹`, `Sᵀ·S = Λ⁻¹`.
    ///
    /// `a − μ` is the least-squares solution of `[U·M; S]·δ ≈ [U·(y − M·μ); 0]`.
    /// Working with the square roots keeps the condition number of the problem
    /// that of `[U·M; S]` rather than its square.
    fn posterior_factor(&self, y: &DVector<T>) -> Result<(SpdFactor<T>, DVector<T>)> {
        let (n, k) = self.design.shape();
        let s = &self.prior.precision_root;
        let mut stacked = DMatrix::zeros(n + s.nrows(), k);
        stacked.rows_mut(0, n).copy_from(&self.noise.whiten(&self.design));
        stacked.rows_mut(n, s.nrows()).copy_from(s);
        let mut rhs = DVector::zeros(n + s.nrows());
        let r = y - &self.design * &self.prior_mean;
        rhs.rows_mut(0, n).copy_from(&self.noise.whiten_vec(&r));

        let qr = stacked.qr();
        let upper = qr.r();
        qr.q_tr_mul(&mut rhs);
        let diag = upper.diagonal().map(|d| d.abs());
        let largest = diag.iter().fold(T::zero(), |m, d| m.max(*d));
        if !(largest > T::zero()) || diag.iter().any(|d| *d <= largest * T::default_epsilon().sqrt()) {
            return Err(Error::SingularPosterior);
        }
        let delta = upper
            .solve_upper_triangular(&rhs.rows(0, k).into_owned())
            .ok_or(Error::SingularPosterior)?;
        // A⁻¹ = Rᵀ·R; flipping column signs of Rᵀ gives the Cholesky factor.
        let mut lower = upper.transpose();
        for (j, mut col) in lower.column_iter_mut().enumerate() {
            if upper[(j, j)] < T::zero() {
                col.neg_mut();
            }
        }
        let factor = SpdFactor::from_lower(lower, "posterior precision").map_err(|_| Error::SingularPosterior)?;
        Ok((factor, &self.prior_mean + delta))
    }
}

#[derive(Debug, Clone)]
enum BOperator<T: Scalar> {
    Woodbury {
        noise: PreparedNoise<T>,
        noise_weighted_design: DMatrix<T>,
        posterior_precision: SpdFactor<T>,
    },
    Dense(SpdFactor<T>),
    Improper,
}

/// The four refactorization outputs `a, A, b, B` and the marginalized likelihood.
#[derive(Debug, Clone)]
pub struct Refactorization<T: Scalar> {
    posterior: GaussianMoment<T>,
    posterior_precision: SpdFactor<T>,
    b: DVector<T>,
    log_det_b: Option<T>,
    log_marginal: LogMarginal<T>,
    space: EvaluationSpace,
    b_operator: BOperator<T>,
}

impl<T: Scalar> Refactorization<T> {
    /// Posterior mean `a`, which is also the MAP value.
    pub fn a(&self) -> &DVector<T> {
        self.posterior.mean()
    }

    /// Posterior covariance `A`.
    pub fn a_cov(&self) -> &DMatrix<T> {
        self.posterior.cov()
    }

    /// Cholesky factor of `A⁻¹`.
    pub fn posterior_precision(&self) -> &SpdFactor<T> {
        &self.posterior_precision
    }

    pub fn posterior(&self) -> &GaussianMoment<T> {
        &self.posterior
    }

    pub fn into_posterior(self) -> GaussianMoment<T> {
        self.posterior
    }

    /// Prior-predictive mean `b = M·μ`.
    pub fn b(&self) -> &DVector<T> {
        &self.b
    }

    /// `ln||B||`, absent for an improper prior.
    pub fn log_det_b(&self) -> Option<T> {
        self.log_det_b
    }

    pub fn log_marginal(&self) -> LogMarginal<T> {
        self.log_marginal
    }

    pub fn space(&self) -> EvaluationSpace {
        self.space
    }

    /// `B⁻¹·v` without forming `B` (on the parameter-space path).
    pub fn apply_b_inverse(&self, v: &DVector<T>) -> Result<DVector<T>> {
        check_dim("vector length vs B", self.b.len(), v.len())?;
        match &self.b_operator {
            BOperator::Woodbury {
                noise,
                noise_weighted_design,
                posterior_precision,
            } => Ok(woodbury_with(noise, noise_weighted_design, posterior_precision, v)),
            BOperator::Dense(f) => Ok(f.solve_vec(v)),
            BOperator::Improper => Err(Error::ImproperMarginal),
        }
    }
}

fn woodbury_with<T: Scalar>(
    noise: &PreparedNoise<T>,
    w: &DMatrix<T>,
    posterior_precision: &SpdFactor<T>,
    v: &DVector<T>,
) -> DVector<T> {
    let cinv_v = noise.apply_inverse_vec(v);
    let proj = w.transpose() * v;
    cinv_v - w * posterior_precision.solve_vec(&proj)
}

fn posterior_precision_factor<T: Scalar>(prior_precision: &DMatrix<T>, f: &DMatrix<T>) -> Result<SpdFactor<T>> {
    SpdFactor::from_symmetric(symmetrize(&(prior_precision + f)), "posterior precision")
        .map_err(|_| Error::SingularPosterior)
}

/// Refactors in the space chosen by [`EvaluationSpace::choose`].
pub fn refactor<T: Scalar>(model: &LinearGaussianModel<T>, y: &DVector<T>) -> Result<Refactorization<T>> {
    refactor_in(model, y, EvaluationSpace::choose(model.n_data(), model.n_params()))
}

/// Refactors with `B` evaluated in the requested space.
pub fn refactor_in<T: Scalar>(
    model: &LinearGaussianModel<T>,
    y: &DVector<T>,
    space: EvaluationSpace,
) -> Result<Refactorization<T>> {
    check_dim("data length vs design rows", model.n_data(), y.len())?;
    ensure_finite_vector(y, "data")?;

    let (ainv, a) = model.posterior_factor(y)?;
    let posterior = GaussianMoment::from_precision(a, ainv.clone(), "posterior covariance")?;
    let b = &model.design * &model.prior_mean;

    let (log_det_b, quad, b_operator) = match (&model.prior.proper, model.noise.log_det()) {
        (Some((_, ln_prior_precision)), Ok(ln_c)) => {
            let r = y - &b;
            match space {
                EvaluationSpace::Parameter => {
                    // rᵀ·B⁻¹·r as the two non-negative terms of the fit at `a`:
                    // (y − M·a)ᵀ·C⁻¹·(y − M·a) + (a − μ)ᵀ·Λ⁻¹·(a − μ).
                    // Expanding through the inversion lemma instead subtracts two
                    // large numbers whenever the data pull far from the prior.
                    let a = posterior.mean();
                    let resid = y - &model.design * a;
                    let shift = &model.prior.precision_root * (a - &model.prior_mean);
                    let quad = model.noise.quad_form(&resid) + shift.norm_squared();
                    let ln_b = ln_c + ainv.log_det() - *ln_prior_precision;
                    let op = BOperator::Woodbury {
                        noise: model.noise.clone(),
                        noise_weighted_design: model.noise.apply_inverse(&model.design),
                        posterior_precision: ainv.clone(),
                    };
                    (Some(ln_b), Some(quad), op)
                }
                EvaluationSpace::Data => {
                    let bf = SpdFactor::from_symmetric(model.b_covariance()?, "B")?;
                    (Some(bf.log_det()), Some(bf.quad_form(&r)), BOperator::Dense(bf))
                }
            }
        }
        _ => (None, None, BOperator::Improper),
    };

    let log_marginal = match (log_det_b, quad) {
        (Some(ln_b), Some(q)) => {
            let half = T::lit(0.5);
            let ln_norm = T::lit(model.n_data() as f64) * ln_two_pi::<T>() + ln_b;
            LogMarginal::Defined(-half * ln_norm - half * q)
        }
        _ => LogMarginal::Undefined,
    };

    Ok(Refactorization {
        posterior,
        posterior_precision: ainv,
        b,
        log_det_b,
        log_marginal,
        space,
        b_operator,
    })
}

/// The conditional posterior `N(θ | a, A)`.
pub fn posterior<T: Scalar>(model: &LinearGaussianModel<T>, y: &DVector<T>) -> Result<GaussianMoment<T>> {
    Ok(refactor(model, y)?.into_posterior())
}

/// `ln N(y | M·μ, C + M·Λ·Mᵀ)`; errors with [`Error::ImproperMarginal`] when `Λ⁻¹` is singular.
pub fn log_marginal_likelihood<T: Scalar>(model: &LinearGaussianModel<T>, y: &DVector<T>) -> Result<T> {
    if !model.is_proper() {
        return Err(Error::ImproperMarginal);
    }
    refactor(model, y)?.log_marginal().into_result()
}

/// `B⁻¹·v = C⁻¹·v − C⁻¹·M·(Λ⁻¹ + Mᵀ·C⁻¹·M)⁻¹·Mᵀ·C⁻¹·v`, never forming `B`.
pub fn woodbury_apply<T: Scalar>(
    noise: &PreparedNoise<T>,
    design: &DMatrix<T>,
    prior_precision: &DMatrix<T>,
    v: &DVector<T>,
) -> Result<DVector<T>> {
    check_dim("noise size vs design rows", design.nrows(), noise.len())?;
    check_dim("vector length vs design rows", design.nrows(), v.len())?;
    check_dim(
        "prior precision vs design columns",
        design.ncols(),
        prior_precision.nrows(),
    )?;
    let w = noise.apply_inverse(design);
    let f = symmetrize(&(design.transpose() * &w));
    let ainv = posterior_precision_factor(prior_precision, &f)?;
    Ok(woodbury_with(noise, &w, &ainv, v))
}

/// `ln||B|| = ln||I + Mᵀ·C⁻¹·M·Λ|| + ln||C||`, evaluated in the `K×K` space.
///
/// With the prior in precision form the first term is
/// `ln||Λ⁻¹ + Mᵀ·C⁻¹·M|| − ln||Λ⁻¹||`.
pub fn logdet_b<T: Scalar>(noise: &PreparedNoise<T>, design: &DMatrix<T>, prior_precision: &DMatrix<T>) -> Result<T> {
    check_dim("noise size vs design rows", design.nrows(), noise.len())?;
    check_dim(
        "prior precision vs design columns",
        design.ncols(),
        prior_precision.nrows(),
    )?;
    let prior = SpdFactor::new(prior_precision, "prior precision").map_err(|_| Error::ImproperMarginal)?;
    let w = noise.apply_inverse(design);
    let f = symmetrize(&(design.transpose() * &w));
    let ainv = posterior_precision_factor(prior_precision, &f)?;
    Ok(noise.log_det()? + ainv.log_det() - prior.log_det())
}

/// Outputs of the `K = 1` refactorization.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarRefactorization<T: Scalar> {
    /// Posterior mean of the scaling.
    pub a: T,
    /// Posterior variance of the scaling.
    pub a_var: T,
    pub b: DVector<T>,
    pub log_det_b: T,
    pub log_marginal: T,
}

/// Single multiplicative scaling `y ≈ θ·m`, using only dot products with `C⁻¹·m`.
///
/// `lambda` is the prior variance and must be strictly positive.
pub fn refactor_scalar<T: Scalar>(
    m: &DVector<T>,
    noise: &NoiseSpec<T>,
    mu: T,
    lambda: T,
    y: &DVector<T>,
) -> Result<ScalarRefactorization<T>> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!(
            "prior variance must be positive and finite, got {lambda}"
        )));
    }
    check_dim("noise size vs model vector", m.len(), noise.len())?;
    check_dim("data length vs model vector", m.len(), y.len())?;
    ensure_finite_vector(m, "model vector")?;
    ensure_finite_vector(y, "data")?;
    let noise = noise.prepare()?;

    let cinv_m = noise.apply_inverse_vec(m);
    let s = m.dot(&cinv_m);
    let prior_precision = lambda.recip();
    let a_inv = prior_precision + s;
    if !(a_inv > T::zero()) {
        return Err(Error::SingularPosterior);
    }
    let a_var = a_inv.recip();
    let a = a_var * (mu * prior_precision + cinv_m.dot(y));
    let b = m * mu;

    // Same non-negative split of rᵀ·B⁻¹·r as the matrix path.
    let resid = y - m * a;
    let shift = a - mu;
    let quad = noise.quad_form(&resid) + shift * shift * prior_precision;
    let log_det_b = noise.log_det()? + (lambda * s).ln_1p();
    let half = T::lit(0.5);
    let log_marginal = -half * (T::lit(m.len() as f64) * ln_two_pi::<T>() + log_det_b) - half * quad;

    Ok(ScalarRefactorization {
        a,
        a_var,
        b,
        log_det_b,
        log_marginal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use std::f64::consts::PI;

    fn random_spd(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
        let g = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        &g * g.transpose() + DMatrix::identity(d, d) * 0.5
    }

    fn random_model(rng: &mut impl Rng, n: usize, k: usize) -> (LinearGaussianModel<f64>, DVector<f64>) {
        let m = DMatrix::from_fn(n, k, |_, _| rng.random_range(-2.0..2.0));
        let c = random_spd(rng, n);
        let lambda = random_spd(rng, k);
        let mu = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        let model = LinearGaussianModel::with_prior_covariance(m, NoiseSpec::Covariance(c), mu, &lambda).unwrap();
        (model, y)
    }

    fn exercise1() -> (LinearGaussianModel<f64>, DVector<f64>) {
        let x: [f64; 4] = [-0.6, 2.0, 2.7, 3.6];
        let m = DMatrix::from_fn(4, 3, |i, j| x[i].powi(2 - j as i32));
        let sig = dvector![0.8, 3.2, 3.3, 3.9];
        let lambda = DMatrix::from_diagonal(&dvector![25.0, 4.0, 64.0]);
        let model = LinearGaussianModel::with_prior_covariance(
            m,
            NoiseSpec::from_sigmas(&sig),
            dvector![1.0, 3.0, 9.0],
            &lambda,
        )
        .unwrap();
        (model, dvector![12.2, 4.1, 0.9, -15.0])
    }

    #[test]
    fn ill_conditioned_prior_covariance() {
        // cond(Λ) ≈ 5e8. References are 50-digit evaluations on the same f64 inputs.
        let m = dmatrix![1.0, 2.0, 0.5; 0.25, -1.0, 3.0; 2.0, 0.0, 1.0; 1.0, 1.0, 1.0];
        let var = dvector![1e-4, 2e-4, 1e-4, 4e-4];
        let lambda = dmatrix![1e6, 999.0, 0.0; 999.0, 1.0, 0.0; 0.0, 0.0, 4.0];
        let y = dvector![3.0, -1.0, 2.0, 0.5];
        let cases: [(usize, [f64; 3], f64); 2] = [
            (
                4,
                [
                    1.072_382_667_537_960_8,
                    0.875_864_856_458_226_9,
                    -0.167_868_820_870_174_84,
                ],
                -4_495.824_339_280_249,
            ),
            (
                2,
                [
                    7.809_432_130_271_774,
                    -1.992_638_457_893_250_2,
                    -1.648_319_712_619_286_8,
                ],
                -11.074_173_706_435_659,
            ),
        ];
        for (n, want_a, want_lm) in cases {
            let model = LinearGaussianModel::with_prior_covariance(
                m.rows(0, n).into_owned(),
                NoiseSpec::Variances(var.rows(0, n).into_owned()),
                dvector![1.0, -2.0, 0.5],
                &lambda,
            )
            .unwrap();
            let r = refactor(&model, &y.rows(0, n).into_owned()).unwrap();
            for (got, want) in r.a().iter().zip(want_a) {
                assert!((got - want).abs() <= 1e-13 * want.abs(), "n = {n}: {got} vs {want}");
            }
            let lm = r.log_marginal().value().unwrap();
            assert!(
                (lm - want_lm).abs() <= 1e-13 * want_lm.abs(),
                "n = {n}: {lm} vs {want_lm}"
            );
        }
    }

    #[test]
    fn exercise_one_map() {
        let (model, y) = exercise1();
        let r = refactor(&model, &y).unwrap();
        let expected = [-2.700_113_698_642_429, 1.753_042_168_246_784, 14.090_693_889_744_91];
        for (got, want) in r.a().iter().zip(expected) {
            assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
        }
        let a_cov = [
            0.408_980_321_199_914,
            -0.861_991_618_425_140,
            -0.673_132_458_397_561,
            -0.861_991_618_425_140,
            2.188_749_611_982_294,
            1.470_991_677_193_609,
            -0.673_132_458_397_561,
            1.470_991_677_193_609,
            1.660_684_852_076_884,
        ];
        for (got, want) in r.a_cov().iter().zip(a_cov) {
            assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
        }
        assert!((r.log_marginal().value().unwrap() + 13.984_455_955_254_761).abs() < 1e-9);
        assert_eq!(r.space(), EvaluationSpace::Parameter);
    }

    #[test]
    fn scalar_textbook_case() {
        let model = LinearGaussianModel::<f64>::new(
            dmatrix![1.0],
            NoiseSpec::Covariance(dmatrix![1.0]),
            dvector![0.0],
            dmatrix![1.0],
        )
        .unwrap();
        for space in [EvaluationSpace::Parameter, EvaluationSpace::Data] {
            let r = refactor_in(&model, &dvector![0.0], space).unwrap();
            assert_eq!(r.a()[0], 0.0);
            assert!((r.a_cov()[(0, 0)] - 0.5).abs() < 1e-15);
            assert_eq!(r.b()[0], 0.0);
            assert!((r.log_det_b().unwrap() - 2f64.ln()).abs() < 1e-15);
            let want = -0.5 * (4.0 * PI).ln();
            assert!((r.log_marginal().value().unwrap() - want).abs() < 1e-15);
        }
        assert_eq!(EvaluationSpace::choose(1, 1), EvaluationSpace::Data);
        let lm = log_marginal_likelihood(&model, &dvector![0.0]).unwrap();
        assert!((lm + 0.5 * (4.0 * PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn identity_holds_at_random_theta() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let (model, y) = random_model(&mut rng, 5, 2);
        let r = refactor(&model, &y).unwrap();
        let lm = r.log_marginal().value().unwrap();
        let lik_cov = model.noise().covariance().unwrap();
        let prior = model.prior().unwrap();
        for _ in 0..20 {
            let theta = DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
            let lik = GaussianMoment::new(model.design() * &theta, lik_cov.clone()).unwrap();
            let lhs = lik.log_pdf(&y).unwrap() + prior.log_pdf(&theta).unwrap();
            let rhs = r.posterior().log_pdf(&theta).unwrap() + lm;
            assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
            let lhs2 = model.log_likelihood(&theta, &y).unwrap() + model.log_prior(&theta).unwrap();
            assert!((lhs - lhs2).abs() < 1e-10);
        }
    }

    #[test]
    fn wide_prior_identity_design_returns_data() {
        let y = dvector![1.5, -2.25, 7.0];
        let model = LinearGaussianModel::new(
            DMatrix::identity(3, 3),
            NoiseSpec::Variances(dvector![4.0, 4.0, 4.0]),
            dvector![10.0, 20.0, 30.0],
            DMatrix::zeros(3, 3),
        )
        .unwrap();
        assert!(!model.is_proper());
        let r = refactor(&model, &y).unwrap();
        assert_eq!(r.a(), &y);
        assert_eq!(r.log_marginal(), LogMarginal::Undefined);
        assert_eq!(r.log_det_b(), None);
        assert_eq!(r.apply_b_inverse(&y), Err(Error::ImproperMarginal));
        assert_eq!(log_marginal_likelihood(&model, &y), Err(Error::ImproperMarginal));
    }

    #[test]
    fn woodbury_degenerates_for_zero_design() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let c = random_spd(&mut rng, 4);
        let noise = NoiseSpec::Covariance(c.clone()).prepare().unwrap();
        let v = dvector![1.0, -2.0, 0.5, 3.0];
        let got = woodbury_apply(&noise, &DMatrix::zeros(4, 2), &DMatrix::identity(2, 2), &v).unwrap();
        let want = noise.apply_inverse_vec(&v);
        assert_eq!(got, want);
        let ld = logdet_b(&noise, &DMatrix::zeros(4, 2), &DMatrix::identity(2, 2)).unwrap();
        assert!((ld - c.determinant().ln()).abs() < 1e-12);
    }

    #[test]
    fn woodbury_and_logdet_match_dense() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..20 {
            let (model, y) = random_model(&mut rng, 6, 2);
            let b = model.b_covariance().unwrap();
            let dense = b.clone().cholesky().unwrap().solve(&y);
            let fast = woodbury_apply(model.noise(), model.design(), model.prior_precision(), &y).unwrap();
            assert!((&fast - &dense).norm() <= 1e-8 * dense.norm());
            let ld = logdet_b(model.noise(), model.design(), model.prior_precision()).unwrap();
            assert!((ld - b.determinant().ln()).abs() < 1e-9);

            let r = refactor(&model, &y).unwrap();
            let back = &b * r.apply_b_inverse(&y).unwrap();
            assert!((back - &y).norm() <= 1e-8 * y.norm());
            let dense_r = refactor_in(&model, &y, EvaluationSpace::Data).unwrap();
            let (l1, l2) = (
                r.log_marginal().value().unwrap(),
                dense_r.log_marginal().value().unwrap(),
            );
            assert!((l1 - l2).abs() < 1e-9);
        }
    }

    #[test]
    fn diagonal_noise_matches_dense_noise() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let var = DVector::from_fn(6, |_, _| rng.random_range(0.5..2.0));
        let m = DMatrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
        let p = random_spd(&mut rng, 2);
        let v = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
        let diag = NoiseSpec::Variances(var.clone()).prepare().unwrap();
        let dense = NoiseSpec::Covariance(DMatrix::from_diagonal(&var)).prepare().unwrap();
        let a = woodbury_apply(&diag, &m, &p, &v).unwrap();
        let b = woodbury_apply(&dense, &m, &p, &v).unwrap();
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn determinant_products_agree() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        for _ in 0..20 {
            let (model, y) = random_model(&mut rng, 5, 3);
            let r = refactor(&model, &y).unwrap();
            let ln_a = r.posterior().factor().unwrap().log_det();
            let ln_lambda = model.prior().unwrap().factor().unwrap().log_det();
            let lhs = ln_a + r.log_det_b().unwrap();
            let rhs = model.noise().log_det().unwrap() + ln_lambda;
            assert!((lhs - rhs).abs() < 1e-9);
            // Shrinkage and expansion orderings.
            assert!(ln_a <= ln_lambda);
            assert!(r.log_det_b().unwrap() >= model.noise().log_det().unwrap());
        }
    }

    #[test]
    fn scalar_path() {
        let s = refactor_scalar(
            &dvector![1.0],
            &NoiseSpec::Covariance(dmatrix![1.0]),
            0.0,
            1.0,
            &dvector![0.0],
        )
        .unwrap();
        assert_eq!(s.a, 0.0);
        assert_eq!(s.a_var, 0.5);

        let s = refactor_scalar::<f64>(
            &dvector![1.0, 1.0],
            &NoiseSpec::Covariance(DMatrix::identity(2, 2)),
            0.0,
            1e12,
            &dvector![2.0, 4.0],
        )
        .unwrap();
        assert!((s.a - 3.0).abs() < 1e-8);

        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let m = DVector::from_fn(16, |_, _| rng.random_range(-2.0..2.0));
        let var = DVector::from_fn(16, |_, _| rng.random_range(0.2..2.0));
        let y = DVector::from_fn(16, |_, _| rng.random_range(-2.0..2.0));
        let noise = NoiseSpec::Variances(var);
        let s = refactor_scalar(&m, &noise, 0.7, 2.5, &y).unwrap();
        let model = LinearGaussianModel::new(
            DMatrix::from_column_slice(16, 1, m.as_slice()),
            noise,
            dvector![0.7],
            dmatrix![1.0 / 2.5],
        )
        .unwrap();
        let r = refactor(&model, &y).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
        assert!(close(s.a, r.a()[0]));
        assert!(close(s.a_var, r.a_cov()[(0, 0)]));
        assert!((&s.b - r.b()).norm() < 1e-12);
        assert!(close(s.log_det_b, r.log_det_b().unwrap()));
        assert!(close(s.log_marginal, r.log_marginal().value().unwrap()));

        assert!(refactor_scalar(&m, &NoiseSpec::Variances(DVector::from_element(16, 1.0)), 0.0, 0.0, &y).is_err());
    }

    #[test]
    fn construction_errors() {
        let noise = || NoiseSpec::Variances(dvector![1.0, 1.0]);
        assert!(matches!(
            LinearGaussianModel::new(DMatrix::zeros(2, 2), noise(), dvector![0.0], DMatrix::zeros(2, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            LinearGaussianModel::new(dmatrix![1.0; f64::NAN], noise(), dvector![0.0], dmatrix![1.0]),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(
            LinearGaussianModel::new(
                DMatrix::identity(2, 2),
                noise(),
                dvector![0.0, 0.0],
                dmatrix![1.0, 0.0; 0.0, -1.0]
            ),
            Err(Error::InvalidInput(_))
        ));
        // Singular but non-negative prior precision is accepted.
        let model = LinearGaussianModel::new(
            DMatrix::identity(2, 2),
            noise(),
            dvector![0.0, 0.0],
            dmatrix![1.0, 0.0; 0.0, 0.0],
        )
        .unwrap();
        assert!(!model.is_proper());
        let r = refactor(&model, &dvector![1.0, 2.0]).unwrap();
        assert!((r.a() - dvector![0.5, 2.0]).norm() < 1e-14);
        assert!(!r.log_marginal().is_defined());
    }

    #[test]
    fn rank_deficient_wide_prior_is_singular() {
        let model = LinearGaussianModel::with_improper_prior(
            dmatrix![1.0, 1.0; 2.0, 2.0; 3.0, 3.0],
            NoiseSpec::Variances(dvector![1.0, 1.0, 1.0]),
        )
        .unwrap();
        assert_eq!(
            refactor(&model, &dvector![1.0, 2.0, 3.0]).unwrap_err(),
            Error::SingularPosterior
        );
    }
}
