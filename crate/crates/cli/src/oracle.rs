//! Slow, independent reference computations used by `verify` and the test suites.
//!
//! Nothing here goes through the refactorization: densities use explicit
//! inverses and LU determinants, least squares uses the normal equations, and
//! marginal likelihoods come from brute-force adaptive quadrature.
//! [`ExactMatrix`] evaluates determinants of sums and products of `f64`
//! matrices with no rounding at all.

use nalgebra::{DMatrix, DVector};
use num_bigint::{BigInt, Sign};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Serialize, Serializer};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn normal_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn normal_matrix<R: Rng + ?Sized>(rng: &mut R, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs of `R`'s diagonal folded into `Q`.
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let qr = normal_matrix(rng, n, n).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// An `n × k` matrix `U·diag(s)·Vᵀ` (`n ≥ k`) with singular values log-uniform on `[1, cond]`.
pub fn conditioned_design<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize, cond: f64) -> DMatrix<f64> {
    let u = random_orthogonal(rng, n).columns(0, k).into_owned();
    let v = random_orthogonal(rng, k);
    let s = DVector::from_fn(k, |_, _| cond.powf(rng.random::<f64>()));
    u * DMatrix::from_diagonal(&s) * v.transpose()
}

/// `Q·diag(λ)·Qᵀ` with eigenvalues log-uniform on `[scale, scale·cond]`, the
/// extremes pinned so the condition number is exactly `cond` when `n > 1`.
pub fn random_spd<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64, cond: f64) -> DMatrix<f64> {
    let q = random_orthogonal(rng, n);
    let eig = DVector::from_fn(n, |i, _| {
        let t = match i {
            0 if n > 1 => 0.0,
            1 if n > 1 => 1.0,
            _ => rng.random::<f64>(),
        };
        scale * cond.powf(t)
    });
    let m = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// A matrix of dyadic rationals `ints·2^exp`, exact for any `f64` input.
#[derive(Debug, Clone)]
pub struct ExactMatrix {
    rows: usize,
    cols: usize,
    ints: Vec<BigInt>,
    exp: i64,
}

/// `(m, e)` with `x = m·2^e` exactly.
fn decompose(x: f64) -> (i64, i64) {
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { -1 } else { 1 };
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let frac = (bits & ((1 << 52) - 1)) as i64;
    if exp_bits == 0 {
        (sign * frac, -1074)
    } else {
        (sign * (frac | 1 << 52), exp_bits - 1075)
    }
}

impl ExactMatrix {
    pub fn from_f64(m: &DMatrix<f64>) -> Self {
        assert!(m.iter().all(|v| v.is_finite()), "exact matrices need finite entries");
        let parts: Vec<(i64, i64)> = m
            .row_iter()
            .flat_map(|r| r.iter().map(|v| decompose(*v)).collect::<Vec<_>>())
            .collect();
        let exp = parts
            .iter()
            .filter(|(mant, _)| *mant != 0)
            .map(|(_, e)| *e)
            .min()
            .unwrap_or(0);
        let ints = parts
            .iter()
            .map(|(mant, e)| {
                if *mant == 0 {
                    BigInt::ZERO
                } else {
                    BigInt::from(*mant) << (e - exp) as usize
                }
            })
            .collect();
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            ints,
            exp,
        }
    }

    fn at(&self, i: usize, j: usize) -> &BigInt {
        &self.ints[i * self.cols + j]
    }

    pub fn transpose(&self) -> Self {
        let ints = (0..self.cols)
            .flat_map(|j| (0..self.rows).map(move |i| (i, j)))
            .map(|(i, j)| self.at(i, j).clone())
            .collect();
        Self {
            rows: self.cols,
            cols: self.rows,
            ints,
            exp: self.exp,
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut ints = Vec::with_capacity(self.rows * other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                ints.push((0..self.cols).map(|t| self.at(i, t) * other.at(t, j)).sum());
            }
        }
        Self {
            rows: self.rows,
            cols: other.cols,
            ints,
            exp: self.exp + other.exp,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let exp = self.exp.min(other.exp);
        let (sa, sb) = ((self.exp - exp) as usize, (other.exp - exp) as usize);
        let ints = self
            .ints
            .iter()
            .zip(&other.ints)
            .map(|(a, b)| (a << sa) + (b << sb))
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            ints,
            exp,
        }
    }

    /// `ln(det m)` by fraction-free Bareiss elimination; `None` unless the determinant is positive.
    pub fn log_det(&self) -> Option<f64> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut m: Vec<Vec<BigInt>> = (0..n)
            .map(|i| (0..n).map(|j| self.at(i, j).clone()).collect())
            .collect();
        let mut prev = BigInt::from(1);
        let mut negate = false;
        for k in 0..n {
            if m[k][k].sign() == Sign::NoSign {
                let swap = (k + 1..n).find(|i| m[*i][k].sign() != Sign::NoSign)?;
                m.swap(k, swap);
                negate = !negate;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    m[i][j] = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &prev;
                }
            }
            prev = m[k][k].clone();
        }
        let det = if negate { -prev } else { prev };
        if det.sign() != Sign::Plus {
            return None;
        }
        let shift = det.bits().saturating_sub(62);
        let top: u64 = (det >> shift).try_into().expect("62 bits fit in u64");
        Some((top as f64).ln() + (shift as f64 + (n as i64 * self.exp) as f64) * std::f64::consts::LN_2)
    }
}

/// `ln|det m|` from the LU factors.
pub fn lu_log_det(m: &DMatrix<f64>) -> f64 {
    let lu = m.clone().lu();
    lu.u().diagonal().iter().map(|d| d.abs().ln()).sum()
}

pub fn dense_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().try_inverse().expect("oracle matrix is invertible")
}

/// `ln N(x | m, V)` with `V⁻¹` formed explicitly.
pub fn dense_log_pdf(x: &DVector<f64>, m: &DVector<f64>, v: &DMatrix<f64>) -> f64 {
    let r = x - m;
    let q = (r.transpose() * dense_inverse(v) * &r)[0];
    -0.5 * (x.len() as f64 * LN_2PI + lu_log_det(v) + q)
}

/// Generalized least squares `(Mᵀ·C⁻¹·M)⁻¹·Mᵀ·C⁻¹·y` through the normal equations.
pub fn gls(design: &DMatrix<f64>, noise_cov: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let ci = dense_inverse(noise_cov);
    let normal = design.transpose() * &ci * design;
    dense_inverse(&normal) * design.transpose() * ci * y
}

/// Serializes a matrix as a list of rows.
pub fn rows<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(m.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()))
}

/// Serializes a vector as a flat list.
pub fn flat<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

/// A random proper linear-Gaussian problem with data drawn from the model itself.
#[derive(Debug, Clone, Serialize)]
pub struct Instance {
    #[serde(serialize_with = "rows")]
    pub design: DMatrix<f64>,
    #[serde(serialize_with = "rows")]
    pub noise_cov: DMatrix<f64>,
    #[serde(serialize_with = "flat")]
    pub prior_mean: DVector<f64>,
    #[serde(serialize_with = "rows")]
    pub prior_cov: DMatrix<f64>,
    #[serde(serialize_with = "flat")]
    pub y: DVector<f64>,
}

impl Instance {
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize, cond: f64) -> Self {
        let design = normal_matrix(rng, n, k);
        let noise_cov = random_spd(rng, n, 0.1, cond);
        let prior_cov = random_spd(rng, k, 1.0, cond);
        let prior_mean = normal_vector(rng, k);
        let theta = draw(rng, &prior_mean, &prior_cov);
        let y = draw(rng, &(&design * theta), &noise_cov);
        Self {
            design,
            noise_cov,
            prior_mean,
            prior_cov,
            y,
        }
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn k(&self) -> usize {
        self.design.ncols()
    }

    pub fn dense_b(&self) -> DMatrix<f64> {
        let b = &self.noise_cov + &self.design * &self.prior_cov * self.design.transpose();
        (&b + b.transpose()) * 0.5
    }

    /// Posterior mode and covariance from the normal equations.
    pub fn posterior(&self) -> (DVector<f64>, DMatrix<f64>) {
        let ci = dense_inverse(&self.noise_cov);
        let li = dense_inverse(&self.prior_cov);
        let cov = dense_inverse(&(&li + self.design.transpose() * &ci * &self.design));
        let mean = &cov * (li * &self.prior_mean + self.design.transpose() * ci * &self.y);
        (mean, cov)
    }

    /// `ln p(y)` by adaptive Gauss–Kronrod quadrature of likelihood × prior; `K` must be 1 or 2.
    pub fn quadrature_log_marginal(&self) -> f64 {
        let ci = dense_inverse(&self.noise_cov);
        let li = dense_inverse(&self.prior_cov);
        let norm =
            -0.5 * ((self.n() + self.k()) as f64 * LN_2PI + lu_log_det(&self.noise_cov) + lu_log_det(&self.prior_cov));
        let log_joint = |theta: &DVector<f64>| {
            let r = &self.y - &self.design * theta;
            let d = theta - &self.prior_mean;
            norm - 0.5 * ((r.transpose() * &ci * &r)[0] + (d.transpose() * &li * &d)[0])
        };
        let (mode, cov) = self.posterior();
        let peak = log_joint(&mode);
        let width = 14.0;
        let integral = match self.k() {
            1 => {
                let s = cov[(0, 0)].sqrt();
                integrate(
                    |t| (log_joint(&DVector::from_element(1, t)) - peak).exp(),
                    mode[0] - width * s,
                    mode[0] + width * s,
                    1e-12,
                )
            }
            2 => {
                let s0 = cov[(0, 0)].sqrt();
                let slope = cov[(1, 0)] / cov[(0, 0)];
                let s1 = (cov[(1, 1)] - slope * cov[(1, 0)]).sqrt();
                let inner = |t0: f64| {
                    let c = mode[1] + slope * (t0 - mode[0]);
                    integrate(
                        |t1| (log_joint(&DVector::from_vec(vec![t0, t1])) - peak).exp(),
                        c - width * s1,
                        c + width * s1,
                        1e-12,
                    )
                };
                integrate(inner, mode[0] - width * s0, mode[0] + width * s0, 1e-11)
            }
            k => panic!("quadrature oracle supports 1 or 2 parameters, not {k}"),
        };
        peak + integral.ln()
    }
}

/// A draw from `N(mean, cov)` through the Cholesky factor.
pub fn draw<R: Rng + ?Sized>(rng: &mut R, mean: &DVector<f64>, cov: &DMatrix<f64>) -> DVector<f64> {
    let l = cov.clone().cholesky().expect("oracle covariance is SPD").l();
    mean + l * normal_vector(rng, mean.len())
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod estimate and its difference from the embedded 7-point Gauss rule.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let pair = f(c - dx) + f(c + dx);
        k += WGK[i] * pair;
        if i % 2 == 1 {
            g += WG[i / 2] * pair;
        }
    }
    (k * h, (k - g).abs() * h)
}

/// Adaptive Gauss–Kronrod integral of `f` over `[a, b]` to relative tolerance `rel`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel: f64) -> f64 {
    let (whole, err) = gk15(&f, a, b);
    let mut segments = vec![(a, b, whole, err)];
    let mut total = whole;
    let mut total_err = err;
    for _ in 0..2000 {
        if total_err <= rel * total.abs() {
            break;
        }
        let worst = (0..segments.len())
            .max_by(|&i, &j| segments[i].3.total_cmp(&segments[j].3))
            .expect("at least one segment");
        let (lo, hi, v, e) = segments.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        total += v1 + v2 - v;
        total_err += e1 + e2 - e;
        segments.push((lo, mid, v1, e1));
        segments.push((mid, hi, v2, e2));
    }
    segments.iter().map(|s| s.2).sum()
}
