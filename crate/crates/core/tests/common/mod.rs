#![allow(dead_code)]

use linmarg::{LinearGaussianModel64, NoiseSpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha20Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn normal_vector(rng: &mut ChaCha20Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn orthogonal(rng: &mut ChaCha20Rng, n: usize) -> DMatrix<f64> {
    normal_matrix(rng, n, n).qr().q()
}

/// `Q·diag(λ)·Qᵀ` with `ln λ` uniform over `[ln scale, ln(scale·cond)]`.
pub fn spd(rng: &mut ChaCha20Rng, n: usize, scale: f64, cond: f64) -> DMatrix<f64> {
    let q = orthogonal(rng, n);
    let eig = DVector::from_fn(n, |_, _| scale * cond.powf(rng.random::<f64>()));
    let m = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    (&m + m.transpose()) * 0.5
}

pub struct Instance {
    pub design: DMatrix<f64>,
    pub noise_cov: DMatrix<f64>,
    pub prior_mean: DVector<f64>,
    pub prior_cov: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Instance {
    /// Prior, noise and data drawn from the generative model itself.
    pub fn random(seed: u64, n: usize, k: usize, cond: f64) -> Self {
        let mut r = rng(seed);
        let design = normal_matrix(&mut r, n, k);
        let noise_cov = spd(&mut r, n, 0.1, cond);
        let prior_cov = spd(&mut r, k, 0.5, cond);
        let prior_mean = normal_vector(&mut r, k);
        let theta = &prior_mean + prior_cov.clone().cholesky().unwrap().l() * normal_vector(&mut r, k);
        let y = &design * theta + noise_cov.clone().cholesky().unwrap().l() * normal_vector(&mut r, n);
        Self {
            design,
            noise_cov,
            prior_mean,
            prior_cov,
            y,
        }
    }

    pub fn model(&self) -> LinearGaussianModel64 {
        LinearGaussianModel64::with_prior_covariance(
            self.design.clone(),
            NoiseSpec::Covariance(self.noise_cov.clone()),
            self.prior_mean.clone(),
            &self.prior_cov,
        )
        .unwrap()
    }

    pub fn dense_b(&self) -> DMatrix<f64> {
        &self.noise_cov + &self.design * &self.prior_cov * self.design.transpose()
    }
}

/// `ln N(x | m, V)` through an explicit inverse and an LU determinant.
pub fn dense_log_pdf(x: &DVector<f64>, m: &DVector<f64>, v: &DMatrix<f64>) -> f64 {
    let r = x - m;
    let inv = v.clone().try_inverse().unwrap();
    let det = v.determinant();
    -0.5 * (x.len() as f64 * (2.0 * std::f64::consts::PI).ln() + det.ln() + (r.transpose() * inv * r)[0])
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
