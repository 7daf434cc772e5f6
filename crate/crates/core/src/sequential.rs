//! Folding independently observed data blocks into the posterior one at a time.
//!
//! The state carries the running posterior precision `A_j⁻¹` and information
//! vector `x_j`, both additive across blocks, so the final `(a, A)` does not
//! depend on block order. The per-block prior predictives `N(y_j | b_j, B_j)` do.
//!
//! An improper prior start is allowed. Until the running precision becomes
//! positive definite the block predictives do not exist; they are skipped and
//! the accumulated evidence is flagged [`Evidence::Partial`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gaussian::{
    checked_symmetric, ensure_finite_matrix, ensure_finite_vector, symmetrize, GaussianMoment, SpdFactor,
};
use crate::noise::{NoiseSpec, PreparedNoise};
use crate::scalar::Scalar;

/// One independently observed data vector `y_j` with design `M_j` and noise `C_j`.
#[derive(Debug, Clone)]
pub struct DataBlock<T: Scalar> {
    y: DVector<T>,
    design: DMatrix<T>,
    noise: PreparedNoise<T>,
}

impl<T: Scalar> DataBlock<T> {
    pub fn new(y: DVector<T>, design: DMatrix<T>, noise: NoiseSpec<T>) -> Result<Self> {
        if design.nrows() == 0 || design.ncols() == 0 {
            return Err(Error::InvalidInput("data block design must be at least 1x1".into()));
        }
        check_dim("block data length vs design rows", design.nrows(), y.len())?;
        check_dim("block noise size vs design rows", design.nrows(), noise.len())?;
        ensure_finite_vector(&y, "block data")?;
        ensure_finite_matrix(&design, "block design")?;
        let noise = noise.prepare()?;
        // Each block's noise must be a proper covariance.
        noise.log_det()?;
        Ok(Self { y, design, noise })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_params(&self) -> usize {
        self.design.ncols()
    }

    pub fn y(&self) -> &DVector<T> {
        &self.y
    }

    pub fn design(&self) -> &DMatrix<T> {
        &self.design
    }

    pub fn noise(&self) -> &PreparedNoise<T> {
        &self.noise
    }
}

/// Accumulated `Σ_j ln N(y_j | b_j, B_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Evidence<T> {
    /// Every block contributed: this is the full log marginalized likelihood.
    Complete { log_marginal: T },
    /// The first `skipped_blocks` blocks arrived while the running precision
    /// was singular and contributed nothing.
    Partial { log_marginal: T, skipped_blocks: usize },
}

impl<T: Copy> Evidence<T> {
    pub fn log_marginal(&self) -> T {
        match self {
            Evidence::Complete { log_marginal } | Evidence::Partial { log_marginal, .. } => *log_marginal,
        }
    }

    pub fn is_complete(&self) -> bool {
        matches!(self, Evidence::Complete { .. })
    }

    /// The total, only when it is complete.
    pub fn complete(&self) -> Result<T> {
        match self {
            Evidence::Complete { log_marginal } => Ok(*log_marginal),
            Evidence::Partial { .. } => Err(Error::ImproperMarginal),
        }
    }
}

/// Running posterior after some number of blocks.
#[derive(Debug, Clone)]
pub struct SequentialState<T: Scalar> {
    posterior_precision: DMatrix<T>,
    info_vector: DVector<T>,
    posterior_mean: DVector<T>,
    precision_factor: Option<SpdFactor<T>>,
    evidence: Evidence<T>,
    blocks_seen: usize,
}

impl<T: Scalar> SequentialState<T> {
    /// Running `A_j⁻¹`.
    pub fn posterior_precision(&self) -> &DMatrix<T> {
        &self.posterior_precision
    }

    /// Running `x_j = Λ⁻¹·μ + Σ M_jᵀ·C_j⁻¹·y_j`.
    pub fn info_vector(&self) -> &DVector<T> {
        &self.info_vector
    }

    /// `a_j`. While [`Self::is_posterior_defined`] is false this is the last
    /// defined value (the prior mean for an improper start).
    pub fn posterior_mean(&self) -> &DVector<T> {
        &self.posterior_mean
    }

    /// Whether `A_j⁻¹` is positive definite.
    pub fn is_posterior_defined(&self) -> bool {
        self.precision_factor.is_some()
    }

    pub fn evidence(&self) -> Evidence<T> {
        self.evidence
    }

    pub fn blocks_seen(&self) -> usize {
        self.blocks_seen
    }

    pub fn n_params(&self) -> usize {
        self.info_vector.len()
    }

    /// `N(θ | a_j, A_j)`.
    pub fn posterior(&self) -> Result<GaussianMoment<T>> {
        let f = self.precision_factor.as_ref().ok_or(Error::SingularPosterior)?;
        GaussianMoment::from_precision(self.posterior_mean.clone(), f.clone(), "posterior covariance")
    }
}

/// `A₀⁻¹ = Λ⁻¹`, `a₀ = μ`, `x₀ = Λ⁻¹·μ`, with zero accumulated evidence.
pub fn sequential_init<T: Scalar>(prior_mean: DVector<T>, prior_precision: DMatrix<T>) -> Result<SequentialState<T>> {
    check_dim(
        "prior precision size vs prior mean",
        prior_mean.len(),
        prior_precision.nrows(),
    )?;
    ensure_finite_vector(&prior_mean, "prior mean")?;
    let prior_precision = checked_symmetric(&prior_precision, "prior precision")?;
    let precision_factor = SpdFactor::from_symmetric(prior_precision.clone(), "prior precision").ok();
    if precision_factor.is_none() {
        let min = prior_precision
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(v.as_f64()));
        let scale = prior_precision.iter().fold(0.0f64, |m, v| m.max(v.as_f64().abs()));
        if min < -1e-10 * scale {
            return Err(Error::InvalidInput(
                "prior precision is not non-negative definite".into(),
            ));
        }
    }
    let info_vector = &prior_precision * &prior_mean;
    let evidence = if precision_factor.is_some() {
        Evidence::Complete {
            log_marginal: T::zero(),
        }
    } else {
        Evidence::Partial {
            log_marginal: T::zero(),
            skipped_blocks: 0,
        }
    };
    Ok(SequentialState {
        posterior_precision: prior_precision,
        info_vector,
        posterior_mean: prior_mean,
        precision_factor,
        evidence,
        blocks_seen: 0,
    })
}

/// Folds one block into the state.
///
/// Returns the new state and the block's prior predictive
/// `N(y_j | M_j·a_{j−1}, C_j + M_j·A_{j−1}·M_jᵀ)`, which is `None` while the
/// incoming precision `A_{j−1}⁻¹` is singular.
pub fn sequential_update<T: Scalar>(
    state: &SequentialState<T>,
    block: &DataBlock<T>,
) -> Result<(SequentialState<T>, Option<GaussianMoment<T>>)> {
    check_dim("block parameters vs state", state.n_params(), block.n_params())?;

    let predictive = match &state.precision_factor {
        Some(f) => {
            let prev_cov = f.inverse();
            let b = &block.design * &state.posterior_mean;
            let big_b = symmetrize(&(block.noise.covariance()? + &block.design * prev_cov * block.design.transpose()));
            let factor = SpdFactor::from_symmetric(big_b.clone(), "block predictive covariance")?;
            Some(GaussianMoment::from_factor(b, big_b, factor))
        }
        None => None,
    };

    let evidence = match (&predictive, state.evidence) {
        (Some(p), ev) => {
            let ln = p.log_pdf(&block.y)?;
            match ev {
                Evidence::Complete { log_marginal } => Evidence::Complete {
                    log_marginal: log_marginal + ln,
                },
                Evidence::Partial {
                    log_marginal,
                    skipped_blocks,
                } => Evidence::Partial {
                    log_marginal: log_marginal + ln,
                    skipped_blocks,
                },
            }
        }
        (None, ev) => Evidence::Partial {
            log_marginal: ev.log_marginal(),
            skipped_blocks: match ev {
                Evidence::Partial { skipped_blocks, .. } => skipped_blocks + 1,
                Evidence::Complete { .. } => 1,
            },
        },
    };

    let w = block.noise.apply_inverse(&block.design);
    let posterior_precision = symmetrize(&(&state.posterior_precision + block.design.transpose() * &w));
    let info_vector = &state.info_vector + w.transpose() * &block.y;
    let precision_factor = SpdFactor::from_symmetric(posterior_precision.clone(), "posterior precision").ok();
    if state.precision_factor.is_some() && precision_factor.is_none() {
        // Adding a non-negative term to a PD tensor cannot lose definiteness
        // except through roundoff.
        return Err(Error::SingularPosterior);
    }
    let posterior_mean = match &precision_factor {
        Some(f) => f.solve_vec(&info_vector),
        None => state.posterior_mean.clone(),
    };

    Ok((
        SequentialState {
            posterior_precision,
            info_vector,
            posterior_mean,
            precision_factor,
            evidence,
            blocks_seen: state.blocks_seen + 1,
        },
        predictive,
    ))
}

/// Result of folding every block.
#[derive(Debug, Clone)]
pub struct SequentialRun<T: Scalar> {
    pub posterior: GaussianMoment<T>,
    pub predictives: Vec<Option<GaussianMoment<T>>>,
    pub evidence: Evidence<T>,
    pub state: SequentialState<T>,
}

/// Initializes from the prior, folds `blocks` in order, and finishes with `(a, A) = (a_J, A_J)`.
pub fn sequential_run<T: Scalar>(
    prior_mean: DVector<T>,
    prior_precision: DMatrix<T>,
    blocks: &[DataBlock<T>],
) -> Result<SequentialRun<T>> {
    let mut state = sequential_init(prior_mean, prior_precision)?;
    let mut predictives = Vec::with_capacity(blocks.len());
    for block in blocks {
        let (next, predictive) = sequential_update(&state, block)?;
        state = next;
        predictives.push(predictive);
    }
    let posterior = state.posterior()?;
    Ok(SequentialRun {
        posterior,
        predictives,
        evidence: state.evidence(),
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refactor::{refactor, LinearGaussianModel};
    use nalgebra::{dmatrix, dvector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_block(rng: &mut impl Rng, n: usize, k: usize) -> DataBlock<f64> {
        let m = DMatrix::from_fn(n, k, |_, _| rng.random_range(-2.0..2.0));
        let var = DVector::from_fn(n, |_, _| rng.random_range(0.3..2.0));
        let y = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        DataBlock::new(y, m, NoiseSpec::Variances(var)).unwrap()
    }

    #[test]
    fn init_examples() {
        let s = sequential_init(dvector![0.0, 0.0], DMatrix::identity(2, 2)).unwrap();
        assert_eq!(s.info_vector(), &dvector![0.0, 0.0]);
        assert_eq!(s.posterior_mean(), &dvector![0.0, 0.0]);

        let prec = DMatrix::from_diagonal(&dvector![1.0 / 25.0, 1.0 / 4.0, 1.0 / 64.0]);
        let s = sequential_init(dvector![1.0, 3.0, 9.0], prec).unwrap();
        let want = dvector![1.0 / 25.0, 3.0 / 4.0, 9.0 / 64.0];
        assert!((s.info_vector() - want).norm() < 1e-15);
        assert!(s.evidence().is_complete());

        let s = sequential_init(dvector![5.0, -5.0], DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(s.info_vector(), &dvector![0.0, 0.0]);
        assert_eq!(s.posterior_mean(), &dvector![5.0, -5.0]);
        assert!(!s.is_posterior_defined());
        assert!(!s.evidence().is_complete());
    }

    #[test]
    fn single_block_equals_refactor() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let block = random_block(&mut rng, 5, 2);
        let mu = dvector![0.5, -0.5];
        let prec = dmatrix![2.0, 0.3; 0.3, 1.0];
        let model = LinearGaussianModel::new(
            block.design().clone(),
            NoiseSpec::Covariance(block.noise().covariance().unwrap()),
            mu.clone(),
            prec.clone(),
        )
        .unwrap();
        let r = refactor(&model, block.y()).unwrap();
        let run = sequential_run(mu, prec, std::slice::from_ref(&block)).unwrap();
        assert!((run.posterior.mean() - r.a()).norm() < 1e-12);
        assert!((run.posterior.cov() - r.a_cov()).norm() < 1e-12);
        let p = run.predictives[0].as_ref().unwrap();
        assert!((p.mean() - r.b()).norm() < 1e-12);
        assert!((p.cov() - model.b_covariance().unwrap()).norm() < 1e-12);
        let lm = r.log_marginal().value().unwrap();
        assert!((run.evidence.complete().unwrap() - lm).abs() < 1e-12);
    }

    #[test]
    fn empty_run_returns_prior() {
        let run = sequential_run(dvector![1.0, 2.0], dmatrix![4.0, 0.0; 0.0, 0.25], &[]).unwrap();
        assert_eq!(run.posterior.mean(), &dvector![1.0, 2.0]);
        assert!((run.posterior.cov() - dmatrix![0.25, 0.0; 0.0, 4.0]).norm() < 1e-15);
        assert_eq!(run.evidence, Evidence::Complete { log_marginal: 0.0 });
        assert!(sequential_run(dvector![1.0], dmatrix![0.0], &[]).is_err());
    }

    #[test]
    fn improper_start_flags_partial_evidence() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let blocks: Vec<_> = (0..3).map(|_| random_block(&mut rng, 4, 2)).collect();
        let run = sequential_run(dvector![0.0, 0.0], DMatrix::zeros(2, 2), &blocks).unwrap();
        assert!(run.predictives[0].is_none());
        assert!(run.predictives[1].is_some());
        match run.evidence {
            Evidence::Partial { skipped_blocks, .. } => assert_eq!(skipped_blocks, 1),
            other => panic!("expected partial evidence, got {other:?}"),
        }
        assert_eq!(run.evidence.complete(), Err(Error::ImproperMarginal));
    }

    #[test]
    fn precision_is_monotone() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let mut state = sequential_init(dvector![0.0, 0.0, 0.0], DMatrix::identity(3, 3) * 0.1).unwrap();
        for _ in 0..4 {
            let block = random_block(&mut rng, 2, 3);
            let (next, _) = sequential_update(&state, &block).unwrap();
            let diff = next.posterior_precision() - state.posterior_precision();
            let min = diff.symmetric_eigen().eigenvalues.min();
            assert!(min >= -1e-10);
            state = next;
        }
        assert_eq!(state.blocks_seen(), 4);
    }

    #[test]
    fn mismatched_block_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let state = sequential_init(dvector![0.0, 0.0], DMatrix::identity(2, 2)).unwrap();
        let block = random_block(&mut rng, 3, 3);
        assert!(matches!(
            sequential_update(&state, &block),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(DataBlock::new(dvector![1.0], dmatrix![1.0, 2.0], NoiseSpec::Variances(dvector![0.0])).is_err());
    }
}
