//! Inference with one nonlinear parameter, the sinusoid frequency `ω`.
//!
//! The linear parameters are integrated out analytically at every `ω` on a
//! log-spaced grid. Frequencies are then drawn from the log-uniform prior and
//! accepted with probability `p(y|ω) / max p(y|ω)`, and each accepted `ω` gets
//! one draw of `θ` from its conditional posterior `N(θ | a(ω), A(ω))`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::sinusoid_design;
use crate::refactor::{log_marginal_likelihood, refactor, LinearGaussianModel, LinearPrior, Refactorization};
use crate::scalar::Scalar;

/// Envelope margin added to the scan maximum, in nats.
pub const ENVELOPE_MARGIN: f64 = 0.1;

/// Proposal budget after which the rejection sampler gives up.
pub const MAX_PROPOSALS: u64 = 1_000_000_000;

/// A log-spaced frequency grid of `count` points from `lo` to `hi` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid<T> {
    pub lo: T,
    pub hi: T,
    pub count: usize,
}

impl<T: Scalar> FrequencyGrid<T> {
    pub fn new(lo: T, hi: T, count: usize) -> Result<Self> {
        if !(lo > T::zero()) || !(hi > lo) || !hi.is_finite() {
            return Err(Error::InvalidDomain {
                lo: lo.as_f64(),
                hi: hi.as_f64(),
            });
        }
        if count < 2 {
            return Err(Error::InvalidInput(format!(
                "frequency grid needs at least 2 points, got {count}"
            )));
        }
        Ok(Self { lo, hi, count })
    }

    /// `ω_g = exp(ln lo + g·(ln hi − ln lo)/(G − 1))`, with the endpoints pinned
    /// to `lo` and `hi` exactly so they stay inside the prior support.
    pub fn omega(&self, g: usize) -> T {
        if g == 0 {
            return self.lo;
        }
        if g + 1 == self.count {
            return self.hi;
        }
        let (ln_lo, ln_hi) = (self.lo.ln(), self.hi.ln());
        let step = (ln_hi - ln_lo) / T::lit((self.count - 1) as f64);
        (ln_lo + T::lit(g as f64) * step).exp()
    }

    pub fn omegas(&self) -> Vec<T> {
        (0..self.count).map(|g| self.omega(g)).collect()
    }
}

/// Normalized log-uniform density `p(ω) = 1 / (ω·ln(hi/lo))` on `(lo, hi)`, `−∞` outside.
pub fn log_uniform_prior<T: Scalar>(omega: T, lo: T, hi: T) -> Result<T> {
    if !(lo > T::zero()) || !(hi > lo) || !hi.is_finite() {
        return Err(Error::InvalidDomain {
            lo: lo.as_f64(),
            hi: hi.as_f64(),
        });
    }
    if !(omega >= lo && omega <= hi) {
        return Ok(T::neg_infinity());
    }
    Ok(-omega.ln() - (hi / lo).ln().ln())
}

/// Log marginal likelihood, log prior and their sum on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyScan<T> {
    pub omegas: Vec<T>,
    pub log_marginal: Vec<T>,
    pub log_prior: Vec<T>,
    pub log_post_unnorm: Vec<T>,
    /// Prior support of `ω`.
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> FrequencyScan<T> {
    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Index of the largest unnormalized log posterior.
    pub fn argmax_posterior(&self) -> Option<usize> {
        argmax(&self.log_post_unnorm)
    }

    /// Index of the largest log marginal likelihood.
    pub fn argmax_marginal(&self) -> Option<usize> {
        argmax(&self.log_marginal)
    }

    /// `ln p(y|ω)` interpolated linearly in `(ln ω, ln p)` between grid points.
    pub fn interpolate_log_marginal(&self, omega: T) -> T {
        let ln_w = omega.ln();
        let pos = self.omegas.partition_point(|w| w.ln() < ln_w);
        if pos == 0 {
            return self.log_marginal[0];
        }
        if pos >= self.len() {
            return self.log_marginal[self.len() - 1];
        }
        let (x0, x1) = (self.omegas[pos - 1].ln(), self.omegas[pos].ln());
        let (y0, y1) = (self.log_marginal[pos - 1], self.log_marginal[pos]);
        if y0 == T::neg_infinity() || y1 == T::neg_infinity() {
            return if ln_w == x1 { y1 } else { T::neg_infinity() };
        }
        let t = (ln_w - x0) / (x1 - x0);
        y0 + t * (y1 - y0)
    }
}

fn argmax<T: Scalar>(values: &[T]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.as_f64().is_nan())
        .fold(None, |best: Option<(usize, T)>, (i, v)| match best {
            Some((_, b)) if b >= *v => best,
            _ => Some((i, *v)),
        })
        .map(|(i, _)| i)
}

/// `ln p(y | ω)` for the sinusoid model at one frequency.
pub fn sinusoid_log_marginal<T: Scalar>(data: &Dataset<T>, prior: &LinearPrior<T>, omega: T) -> Result<T> {
    let design = sinusoid_design(data.x(), omega)?;
    let model = LinearGaussianModel::from_prior(design, data.noise(), prior)?;
    log_marginal_likelihood(&model, data.y())
}

/// The full refactorization of the sinusoid model at one frequency.
pub fn conditional_refactor<T: Scalar>(
    data: &Dataset<T>,
    prior: &LinearPrior<T>,
    omega: T,
) -> Result<Refactorization<T>> {
    let design = sinusoid_design(data.x(), omega)?;
    let model = LinearGaussianModel::from_prior(design, data.noise(), prior)?;
    refactor(&model, data.y())
}

/// Evaluates `ln p(y|ω) + ln p(ω)` on the grid, in parallel, ordered by grid index.
pub fn frequency_scan<T: Scalar>(
    data: &Dataset<T>,
    prior: &LinearPrior<T>,
    grid: &FrequencyGrid<T>,
) -> Result<FrequencyScan<T>> {
    if prior.dim() != 3 {
        return Err(Error::DimensionMismatch {
            context: "sinusoid prior dimension",
            expected: 3,
            actual: prior.dim(),
        });
    }
    let omegas = grid.omegas();
    let log_marginal = omegas
        .par_iter()
        .map(|&w| sinusoid_log_marginal(data, prior, w))
        .collect::<Result<Vec<T>>>()?;
    let log_prior = omegas
        .iter()
        .map(|&w| log_uniform_prior(w, grid.lo, grid.hi))
        .collect::<Result<Vec<T>>>()?;
    let log_post_unnorm = log_marginal.iter().zip(&log_prior).map(|(a, b)| *a + *b).collect();
    Ok(FrequencyScan {
        omegas,
        log_marginal,
        log_prior,
        log_post_unnorm,
        lo: grid.lo,
        hi: grid.hi,
    })
}

/// Tuning of the rejection sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RejectionConfig {
    /// Nats added to the scan maximum to form the envelope.
    pub margin: f64,
    pub max_proposals: u64,
}

impl Default for RejectionConfig {
    fn default() -> Self {
        Self {
            margin: ENVELOPE_MARGIN,
            max_proposals: MAX_PROPOSALS,
        }
    }
}

/// Accepted frequencies plus the bookkeeping of how they were obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaDraws<T> {
    pub omegas: Vec<T>,
    pub proposals: u64,
    pub seed: u64,
}

impl<T> OmegaDraws<T> {
    pub fn accepted(&self) -> usize {
        self.omegas.len()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.omegas.len() as f64 / self.proposals as f64
        }
    }
}

/// Draws `n` frequencies from the posterior by rejection from the log-uniform prior.
pub fn rejection_sample_omega<T: Scalar>(scan: &FrequencyScan<T>, n: usize, seed: u64) -> Result<OmegaDraws<T>> {
    rejection_sample_omega_with(scan, n, seed, RejectionConfig::default())
}

pub fn rejection_sample_omega_with<T: Scalar>(
    scan: &FrequencyScan<T>,
    n: usize,
    seed: u64,
    config: RejectionConfig,
) -> Result<OmegaDraws<T>> {
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    if scan.is_empty() {
        return Err(Error::DegenerateScan);
    }
    if scan
        .log_marginal
        .iter()
        .any(|v| v.as_f64().is_nan() || *v == -T::neg_infinity())
    {
        return Err(Error::InvalidInput("frequency scan contains NaN or +inf".into()));
    }
    let max = scan
        .log_marginal
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(None, |m: Option<T>, v| Some(m.map_or(v, |m| if v > m { v } else { m })))
        .ok_or(Error::DegenerateScan)?;
    let envelope = max + T::lit(config.margin);

    let (ln_lo, ln_hi) = (scan.lo.ln(), scan.hi.ln());
    let width = ln_hi - ln_lo;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut omegas = Vec::with_capacity(n);
    let mut proposals = 0u64;
    while omegas.len() < n {
        if proposals >= config.max_proposals {
            return Err(Error::EnvelopeTooLoose {
                proposals,
                accepted: omegas.len(),
                requested: n,
            });
        }
        proposals += 1;
        let omega = (ln_lo + T::unit_uniform(&mut rng) * width).exp();
        let u = T::unit_uniform(&mut rng);
        // Open support: the boundary itself is never accepted.
        if !(omega > scan.lo && omega < scan.hi) {
            continue;
        }
        let log_l = scan.interpolate_log_marginal(omega);
        if u.ln() < log_l - envelope {
            omegas.push(omega);
        }
    }
    Ok(OmegaDraws {
        omegas,
        proposals,
        seed,
    })
}

/// Rows `(θ…, ω)` drawn from the joint posterior, with the sampler's provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSamples<T: Scalar> {
    /// `n × (K + 1)`; the last column is `ω`.
    pub rows: DMatrix<T>,
    pub seed: u64,
    pub omega_seed: u64,
    pub accepted: usize,
    pub proposals: u64,
}

impl<T: Scalar> JointSamples<T> {
    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn omega(&self, i: usize) -> T {
        self.rows[(i, self.rows.ncols() - 1)]
    }

    pub fn theta(&self, i: usize) -> DVector<T> {
        let k = self.rows.ncols() - 1;
        self.rows.row(i).columns(0, k).transpose()
    }
}

/// One `θ ~ N(θ | a(ω), A(ω))` per frequency draw, from a single seeded stream.
pub fn joint_posterior_samples<T: Scalar>(
    data: &Dataset<T>,
    prior: &LinearPrior<T>,
    draws: &OmegaDraws<T>,
    seed: u64,
) -> Result<JointSamples<T>> {
    let k = prior.dim();
    let n = draws.omegas.len();
    let mut rows = DMatrix::zeros(n, k + 1);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for (i, &omega) in draws.omegas.iter().enumerate() {
        if !omega.is_finite() {
            return Err(Error::NonFinite { what: "omega draw" });
        }
        let r = conditional_refactor(data, prior, omega)?;
        let theta = r.posterior().sample_with(&mut rng, 1)?;
        for j in 0..k {
            rows[(i, j)] = theta[(0, j)];
        }
        rows[(i, k)] = omega;
    }
    Ok(JointSamples {
        rows,
        seed,
        omega_seed: draws.seed,
        accepted: draws.accepted(),
        proposals: draws.proposals,
    })
}
