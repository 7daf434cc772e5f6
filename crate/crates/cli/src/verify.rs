//! The `verify` command: invariant suites on random instances plus the bundled fixtures.
//!
//! Each check returns an [`Outcome`]; a failing check carries a JSON dump of
//! the inputs that broke it so the case can be replayed.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use linmarg::sampling::conditional_refactor;
use linmarg::{
    frequency_scan, joint_posterior_samples, logdet_b, polynomial_design, refactor, refactor_in,
    rejection_sample_omega, sequential_run, DataBlock, Dataset64, EvaluationSpace, FrequencyGrid,
    LinearGaussianModel64, LinearPrior64, NoiseSpec,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::args::VerifyArgs;
use crate::error::{CliError, CliResult};
use crate::io::{load_dataset, parse_dataset};
use crate::oracle::{
    conditioned_design, dense_inverse, dense_log_pdf, flat, gls, lu_log_det, normal_vector, random_spd, rows,
    ExactMatrix, Instance,
};
use crate::report::to_json;

pub const EXERCISE1_CSV: &str = include_str!("../fixtures/exercise1.csv");
pub const EXERCISE2_CSV: &str = include_str!("../fixtures/exercise2.csv");
pub const EXERCISE1_EXPECTED: &str = include_str!("../fixtures/exercise1_expected.json");

/// Reference results for the quadratic-fit fixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Exercise1Expected {
    pub degree: i64,
    pub prior_mean: Vec<f64>,
    pub prior_var: Vec<f64>,
    pub design: Vec<Vec<f64>>,
    pub map: Vec<f64>,
    pub map_tolerance: f64,
}

/// Exercise 2 uses a zero-mean prior with variances (25, 25, 100).
pub fn exercise2_prior() -> LinearPrior64 {
    LinearPrior64::from_variances(DVector::zeros(3), &DVector::from_vec(vec![25.0, 25.0, 100.0]))
        .expect("fixed prior is valid")
}

pub struct Fixtures {
    pub exercise1: Dataset64,
    pub exercise2: Dataset64,
    pub expected: Exercise1Expected,
}

impl Fixtures {
    pub fn bundled() -> CliResult<Self> {
        Ok(Self {
            exercise1: parse_dataset(Path::new("exercise1.csv"), EXERCISE1_CSV.as_bytes())?,
            exercise2: parse_dataset(Path::new("exercise2.csv"), EXERCISE2_CSV.as_bytes())?,
            expected: parse_expected(EXERCISE1_EXPECTED)?,
        })
    }

    pub fn from_dir(dir: &Path) -> CliResult<Self> {
        let path = dir.join("exercise1_expected.json");
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        Ok(Self {
            exercise1: load_dataset(&dir.join("exercise1.csv"))?,
            exercise2: load_dataset(&dir.join("exercise2.csv"))?,
            expected: parse_expected(&text)?,
        })
    }
}

fn parse_expected(text: &str) -> CliResult<Exercise1Expected> {
    serde_json::from_str(text).map_err(|e| CliError::Validation(format!("exercise1_expected.json: {e}")))
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    /// Inputs of the first failing case.
    pub dump: Option<String>,
}

impl Outcome {
    fn pass(name: &'static str, detail: String) -> Self {
        Self {
            name,
            passed: true,
            detail,
            dump: None,
        }
    }

    fn fail(name: &'static str, detail: String, inputs: &impl Serialize) -> Self {
        Self {
            name,
            passed: false,
            detail,
            dump: to_json(inputs).ok(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{}  {}  ({})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

/// Independent generator per property, so adding a property never shifts another's cases.
fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}

fn vec_rel_err(got: &DVector<f64>, want: &DVector<f64>) -> f64 {
    (got - want).norm() / want.norm().max(1.0)
}

fn model_of(inst: &Instance) -> linmarg::Result<LinearGaussianModel64> {
    LinearGaussianModel64::with_prior_covariance(
        inst.design.clone(),
        NoiseSpec::Covariance(inst.noise_cov.clone()),
        inst.prior_mean.clone(),
        &inst.prior_cov,
    )
}

/// Condition number `10^(max_exp·u)` with `u` uniform.
fn log_uniform_cond(rng: &mut ChaCha20Rng, max_exp: f64) -> f64 {
    10f64.powf(max_exp * rng.random::<f64>())
}

/// Instances for the identity and determinant checks: `N ≤ 8`, `K ≤ 4`, condition up to `1e6`.
fn small_instance(rng: &mut ChaCha20Rng) -> Instance {
    let n = rng.random_range(1..=8);
    let k = rng.random_range(1..=4);
    let cond = log_uniform_cond(rng, 6.0);
    Instance::random(rng, n, k, cond)
}

#[derive(Serialize)]
struct IdentityCase<'a> {
    instance: &'a Instance,
    theta: Option<Vec<f64>>,
    error: Option<String>,
}

pub const IDENTITY: &str = "refactorization identity";
pub const IDENTITY_TOL: f64 = 1e-9;

/// `ln N(y|Mθ,C) + ln N(θ|μ,Λ) = ln N(θ|a,A) + ln N(y|b,B)` at 20 draws of `θ` per instance.
///
/// `θ` is drawn from the posterior as the normal equations give it, so the log
/// densities stay moderate and an absolute tolerance is meaningful.
pub fn check_identity(seed: u64, cases: usize) -> Outcome {
    let mut rng = rng_for(seed, 1);
    let mut theta_rng = rng_for(seed, 2);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let inst = small_instance(&mut rng);
        let (post_mean, post_cov) = inst.posterior();
        let fail = |theta: Option<DVector<f64>>, e: String| {
            Outcome::fail(
                IDENTITY,
                e.clone(),
                &IdentityCase {
                    instance: &inst,
                    theta: theta.map(|t| t.iter().copied().collect()),
                    error: Some(e),
                },
            )
        };
        let model = match model_of(&inst) {
            Ok(m) => m,
            Err(e) => return fail(None, e.to_string()),
        };
        let r = match refactor(&model, &inst.y) {
            Ok(r) => r,
            Err(e) => return fail(None, e.to_string()),
        };
        let lm = r.log_marginal().value().unwrap_or(f64::NAN);
        for _ in 0..20 {
            let theta = crate::oracle::draw(&mut theta_rng, &post_mean, &post_cov);
            let lhs = model
                .log_likelihood(&theta, &inst.y)
                .and_then(|l| Ok(l + model.log_prior(&theta)?));
            let rhs = r.posterior().log_pdf(&theta).map(|p| p + lm);
            let diff = match (lhs, rhs) {
                (Ok(l), Ok(rr)) => (l - rr).abs(),
                (Err(e), _) | (_, Err(e)) => return fail(Some(theta), e.to_string()),
            };
            if !(diff <= IDENTITY_TOL) {
                return fail(Some(theta), format!("|log LHS - log RHS| = {diff:.3e}"));
            }
            worst = worst.max(diff);
        }
    }
    Outcome::pass(
        IDENTITY,
        format!("{cases} instances x 20 theta, max |diff| = {worst:.2e}"),
    )
}

pub const DETERMINANT: &str = "determinant product";
pub const DETERMINANT_TOL: f64 = 1e-9;

/// `ln|A| + ln|B| = ln|C| + ln|Λ|` on the identity check's instances, with
/// `ln|A|` from the refactorization and the other three determinants exact.
/// The library's own `ln|B|` must match the exact value as well.
pub fn check_determinant(seed: u64, cases: usize) -> Outcome {
    let mut rng = rng_for(seed, 1);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let inst = small_instance(&mut rng);
        let r = match model_of(&inst).and_then(|m| refactor(&m, &inst.y)) {
            Ok(r) => r,
            Err(e) => return Outcome::fail(DETERMINANT, e.to_string(), &inst),
        };
        let m = ExactMatrix::from_f64(&inst.design);
        let c = ExactMatrix::from_f64(&inst.noise_cov);
        let lambda = ExactMatrix::from_f64(&inst.prior_cov);
        let exact_b = c.add(&m.mul(&lambda).mul(&m.transpose())).log_det();
        let (ln_b, ln_c, ln_l) = match (exact_b, c.log_det(), lambda.log_det()) {
            (Some(b), Some(c), Some(l)) => (b, c, l),
            _ => return Outcome::fail(DETERMINANT, "instance is not positive definite".into(), &inst),
        };
        let ln_a = -r.posterior_precision().log_det();
        let product = (ln_a + ln_b - ln_c - ln_l).abs();
        let lemma = (r.log_det_b().unwrap_or(f64::NAN) - ln_b).abs();
        if !(product <= DETERMINANT_TOL && lemma <= DETERMINANT_TOL) {
            return Outcome::fail(
                DETERMINANT,
                format!("|ln|A| + ln|B| - ln|C| - ln|L|| = {product:.3e}, |ln|B| - exact| = {lemma:.3e}"),
                &inst,
            );
        }
        worst = worst.max(product).max(lemma);
    }
    Outcome::pass(DETERMINANT, format!("{cases} instances, max |diff| = {worst:.2e}"))
}

pub const QUADRATURE: &str = "quadrature oracle";
pub const QUADRATURE_TOL: f64 = 1e-6;

/// Marginal likelihood against adaptive quadrature of likelihood × prior, alternating `K = 1, 2`.
pub fn check_quadrature(seed: u64, cases: usize) -> Outcome {
    let mut rng = rng_for(seed, 3);
    let mut worst = 0.0f64;
    for c in 0..cases {
        let k = 1 + c % 2;
        let n = rng.random_range(1..=6);
        let cond = log_uniform_cond(&mut rng, 2.0);
        let inst = Instance::random(&mut rng, n, k, cond);
        let lm = match model_of(&inst).and_then(|m| linmarg::log_marginal_likelihood(&m, &inst.y)) {
            Ok(v) => v,
            Err(e) => return Outcome::fail(QUADRATURE, e.to_string(), &inst),
        };
        let q = inst.quadrature_log_marginal();
        // Relative error of p(y) itself.
        let rel = (lm - q).exp_m1().abs();
        if !(rel <= QUADRATURE_TOL) {
            return Outcome::fail(
                QUADRATURE,
                format!("relative error {rel:.3e} (ln p = {lm}, quadrature {q})"),
                &inst,
            );
        }
        worst = worst.max(rel);
    }
    Outcome::pass(
        QUADRATURE,
        format!("{cases} instances, max relative error = {worst:.2e}"),
    )
}

pub const WOODBURY: &str = "woodbury and determinant-lemma fast paths";
pub const WOODBURY_TOL: f64 = 1e-8;

/// Inversion lemma, determinant lemma and both evaluation spaces against dense `B`, `N ≤ 64`, `K ≤ 8`.
pub fn check_woodbury(seed: u64, cases: usize) -> Outcome {
    let mut rng = rng_for(seed, 4);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let n = rng.random_range(1..=64);
        let k = rng.random_range(1..=8);
        let cond = log_uniform_cond(&mut rng, 3.0);
        let inst = Instance::random(&mut rng, n, k, cond);
        let v = normal_vector(&mut rng, n);
        let dense_b = inst.dense_b();
        let b_mean = &inst.design * &inst.prior_mean;
        let want_lm = dense_log_pdf(&inst.y, &b_mean, &dense_b);
        let want_ld = lu_log_det(&dense_b);
        let want_v = dense_inverse(&dense_b) * &v;
        let run = || -> linmarg::Result<[f64; 4]> {
            let model = model_of(&inst)?;
            let p = refactor_in(&model, &inst.y, EvaluationSpace::Parameter)?;
            let d = refactor_in(&model, &inst.y, EvaluationSpace::Data)?;
            let wv = linmarg::woodbury_apply(model.noise(), model.design(), model.prior_precision(), &v)?;
            let ld = logdet_b(model.noise(), model.design(), model.prior_precision())?;
            Ok([
                rel_err(p.log_marginal().into_result()?, want_lm),
                rel_err(d.log_marginal().into_result()?, want_lm),
                vec_rel_err(&wv, &want_v),
                rel_err(ld, want_ld),
            ])
        };
        let errs = match run() {
            Ok(e) => e,
            Err(e) => return Outcome::fail(WOODBURY, e.to_string(), &inst),
        };
        let labels = ["parameter-space ln p", "data-space ln p", "B^-1 v", "ln|B|"];
        for (label, e) in labels.iter().zip(errs) {
            if !(e <= WOODBURY_TOL) {
                return Outcome::fail(
                    WOODBURY,
                    format!("{label}: relative error {e:.3e}"),
                    &(&inst, v.as_slice()),
                );
            }
            worst = worst.max(e);
        }
    }
    Outcome::pass(WOODBURY, format!("{cases} instances, max relative error = {worst:.2e}"))
}

#[derive(Serialize)]
struct SequentialCase {
    #[serde(serialize_with = "flat")]
    prior_mean: DVector<f64>,
    #[serde(serialize_with = "rows")]
    prior_cov: DMatrix<f64>,
    blocks: Vec<Block>,
}

#[derive(Serialize)]
struct Block {
    #[serde(serialize_with = "flat")]
    y: DVector<f64>,
    #[serde(serialize_with = "rows")]
    design: DMatrix<f64>,
    #[serde(serialize_with = "rows")]
    noise_cov: DMatrix<f64>,
}

pub const SEQUENTIAL: &str = "sequential equivalence and order invariance";
pub const SEQUENTIAL_TOL: f64 = 1e-10;
pub const SEQUENTIAL_EVIDENCE_TOL: f64 = 1e-9;

const ORDERINGS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Three random blocks folded in all six orders against the concatenated fit.
pub fn check_sequential(seed: u64, cases: usize) -> Outcome {
    let mut rng = rng_for(seed, 5);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let k = rng.random_range(1..=4);
        let prior_mean = normal_vector(&mut rng, k);
        let cond = log_uniform_cond(&mut rng, 2.0);
        let prior_cov = random_spd(&mut rng, k, 1.0, cond);
        let raw: Vec<_> = (0..3)
            .map(|_| {
                let n = rng.random_range(1..=4);
                let cond = log_uniform_cond(&mut rng, 2.0);
                let inst = Instance::random(&mut rng, n, k, cond);
                Block {
                    y: inst.y,
                    design: inst.design,
                    noise_cov: inst.noise_cov,
                }
            })
            .collect();
        let case = SequentialCase {
            prior_mean,
            prior_cov,
            blocks: raw,
        };
        match sequential_case(&case) {
            Ok(errs) => {
                for (label, e, tol) in errs {
                    if !(e <= tol) {
                        return Outcome::fail(SEQUENTIAL, format!("{label}: {e:.3e}"), &case);
                    }
                    worst = worst.max(e);
                }
            }
            Err(e) => return Outcome::fail(SEQUENTIAL, e.to_string(), &case),
        }
    }
    Outcome::pass(
        SEQUENTIAL,
        format!("{cases} instances x 6 orders, max error = {worst:.2e}"),
    )
}

fn sequential_case(case: &SequentialCase) -> linmarg::Result<Vec<(&'static str, f64, f64)>> {
    let k = case.prior_mean.len();
    let blocks = case
        .blocks
        .iter()
        .map(|b| {
            DataBlock::new(
                b.y.clone(),
                b.design.clone(),
                NoiseSpec::Covariance(b.noise_cov.clone()),
            )
        })
        .collect::<linmarg::Result<Vec<_>>>()?;
    let total: usize = blocks.iter().map(DataBlock::len).sum();
    let mut design = DMatrix::zeros(total, k);
    let mut y = DVector::zeros(total);
    let mut cov = DMatrix::zeros(total, total);
    let mut row = 0;
    for b in &case.blocks {
        let n = b.y.len();
        design.rows_mut(row, n).copy_from(&b.design);
        y.rows_mut(row, n).copy_from(&b.y);
        cov.view_mut((row, row), (n, n)).copy_from(&b.noise_cov);
        row += n;
    }
    let joint = refactor(
        &LinearGaussianModel64::with_prior_covariance(
            design,
            NoiseSpec::Covariance(cov),
            case.prior_mean.clone(),
            &case.prior_cov,
        )?,
        &y,
    )?;
    let joint_lm = joint.log_marginal().into_result()?;
    let precision = dense_inverse(&case.prior_cov);
    let mut errs = Vec::new();
    let mut first: Option<(DVector<f64>, DMatrix<f64>)> = None;
    for order in ORDERINGS {
        let ordered: Vec<_> = order.iter().map(|&i| blocks[i].clone()).collect();
        let run = sequential_run(case.prior_mean.clone(), precision.clone(), &ordered)?;
        let (a, cov) = (run.posterior.mean().clone(), run.posterior.cov().clone());
        errs.push(("mean vs concatenated", vec_rel_err(&a, joint.a()), SEQUENTIAL_TOL));
        let cov_err = (&cov - joint.a_cov()).norm() / joint.a_cov().norm().max(1.0);
        errs.push(("covariance vs concatenated", cov_err, SEQUENTIAL_TOL));
        errs.push((
            "log marginal vs concatenated",
            rel_err(run.evidence.complete()?, joint_lm),
            SEQUENTIAL_EVIDENCE_TOL,
        ));
        match &first {
            None => first = Some((a, cov)),
            Some((a0, c0)) => {
                errs.push(("mean across orders", vec_rel_err(&a, a0), SEQUENTIAL_TOL));
                errs.push((
                    "covariance across orders",
                    (&cov - c0).norm() / c0.norm().max(1.0),
                    SEQUENTIAL_TOL,
                ));
            }
        }
    }
    Ok(errs)
}

pub const WIDE_PRIOR: &str = "wide-prior limit";
pub const WIDE_PRIOR_TOL: f64 = 1e-8;

/// Zero prior precision reproduces GLS and leaves the marginal undefined.
pub fn check_wide_prior(seed: u64, cases: usize) -> Outcome {
    let mut rng = rng_for(seed, 6);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let k = rng.random_range(1..=4);
        let n = k + rng.random_range(0..=6);
        let cond = log_uniform_cond(&mut rng, 3.0);
        let mut inst = Instance::random(&mut rng, n, k, cond);
        // The normal equations square the design's condition number, so it is
        // bounded here to keep a 1e-8 comparison meaningful for any solver.
        inst.design = conditioned_design(&mut rng, n, k, 10.0);
        let model = LinearGaussianModel64::with_improper_prior(
            inst.design.clone(),
            NoiseSpec::Covariance(inst.noise_cov.clone()),
        );
        let r = match model.and_then(|m| refactor(&m, &inst.y)) {
            Ok(r) => r,
            Err(e) => return Outcome::fail(WIDE_PRIOR, e.to_string(), &inst),
        };
        if r.log_marginal().is_defined() {
            return Outcome::fail(WIDE_PRIOR, "marginal reported as defined".into(), &inst);
        }
        let e = vec_rel_err(r.a(), &gls(&inst.design, &inst.noise_cov, &inst.y));
        if !(e <= WIDE_PRIOR_TOL) {
            return Outcome::fail(WIDE_PRIOR, format!("mean vs GLS relative error {e:.3e}"), &inst);
        }
        worst = worst.max(e);
    }
    Outcome::pass(
        WIDE_PRIOR,
        format!("{cases} instances, max relative error = {worst:.2e}"),
    )
}

pub const CALIBRATION: &str = "conditional-sampling calibration";
pub const CALIBRATION_DRAWS: usize = 100_000;

/// `10⁵` draws of `θ | ω` against `(a(ω), A(ω))`, means and covariances within 4 standard errors.
pub fn check_calibration(data: &Dataset64, omega: f64, seed: u64) -> Outcome {
    let r = match conditional_refactor(data, &exercise2_prior(), omega) {
        Ok(r) => r,
        Err(e) => return Outcome::fail(CALIBRATION, e.to_string(), &omega),
    };
    let draws = match r.posterior().sample(CALIBRATION_DRAWS, seed) {
        Ok(d) => d,
        Err(e) => return Outcome::fail(CALIBRATION, e.to_string(), &omega),
    };
    let n = CALIBRATION_DRAWS as f64;
    let k = draws.ncols();
    let mean: Vec<f64> = (0..k).map(|j| draws.column(j).mean()).collect();
    let (a, cov) = (r.a(), r.a_cov());
    let mut worst = 0.0f64;
    for i in 0..k {
        let z = (mean[i] - a[i]).abs() / (cov[(i, i)] / n).sqrt();
        worst = worst.max(z);
        for j in i..k {
            let s = (0..CALIBRATION_DRAWS)
                .map(|t| (draws[(t, i)] - mean[i]) * (draws[(t, j)] - mean[j]))
                .sum::<f64>()
                / (n - 1.0);
            let se = ((cov[(i, i)] * cov[(j, j)] + cov[(i, j)].powi(2)) / n).sqrt();
            worst = worst.max((s - cov[(i, j)]).abs() / se);
        }
    }
    if worst <= 4.0 {
        Outcome::pass(
            CALIBRATION,
            format!("omega = {omega}, max deviation = {worst:.2} standard errors"),
        )
    } else {
        Outcome::fail(
            CALIBRATION,
            format!("deviation of {worst:.2} standard errors"),
            &(omega, seed),
        )
    }
}

pub const DESIGN: &str = "design-matrix reproduction";

/// The quadratic design at the fixture abscissae equals the stored matrix bit for bit.
pub fn check_design(fx: &Fixtures) -> Outcome {
    let want = &fx.expected.design;
    let got = match polynomial_design(fx.exercise1.x(), fx.expected.degree) {
        Ok(m) => m,
        Err(e) => return Outcome::fail(DESIGN, e.to_string(), &fx.expected),
    };
    let same = got.nrows() == want.len()
        && want
            .iter()
            .enumerate()
            .all(|(i, row)| row.len() == got.ncols() && row.iter().enumerate().all(|(j, v)| got[(i, j)] == *v));
    if same {
        Outcome::pass(DESIGN, format!("{}x{} exact", got.nrows(), got.ncols()))
    } else {
        Outcome::fail(
            DESIGN,
            format!("computed {got} differs from stored matrix"),
            &fx.expected,
        )
    }
}

pub const EXERCISE1: &str = "exercise-1 MAP";

/// MAP of the quadratic fixture against the stored target.
pub fn check_exercise1(fx: &Fixtures) -> Outcome {
    let ex = &fx.expected;
    let run = || -> CliResult<DVector<f64>> {
        if ex.degree < 0 {
            return Err(linmarg::Error::InvalidDegree(ex.degree).into());
        }
        let design = polynomial_design(fx.exercise1.x(), ex.degree)?;
        let prior = LinearPrior64::from_variances(
            DVector::from_vec(ex.prior_mean.clone()),
            &DVector::from_vec(ex.prior_var.clone()),
        )?;
        let model = LinearGaussianModel64::from_prior(design, fx.exercise1.noise(), &prior)?;
        Ok(refactor(&model, fx.exercise1.y())?.a().clone())
    };
    let a = match run() {
        Ok(a) => a,
        Err(e) => return Outcome::fail(EXERCISE1, e.to_string(), ex),
    };
    if a.len() != ex.map.len() {
        return Outcome::fail(
            EXERCISE1,
            format!("{} parameters, target has {}", a.len(), ex.map.len()),
            ex,
        );
    }
    let mut detail = String::new();
    let mut ok = true;
    for (i, (got, want)) in a.iter().zip(&ex.map).enumerate() {
        if !((got - want).abs() <= ex.map_tolerance) {
            ok = false;
            let _ = write!(detail, "component {i}: got {got}, target {want}; ");
        }
    }
    if ok {
        let shown: Vec<String> = a.iter().map(|v| format!("{v:.4}")).collect();
        Outcome::pass(EXERCISE1, format!("a = ({})", shown.join(", ")))
    } else {
        Outcome::fail(EXERCISE1, detail.trim_end_matches("; ").to_string(), ex)
    }
}

pub const EXERCISE2: &str = "exercise-2 pipeline";

/// Loads the sinusoid fixture, scans a coarse grid and draws a few joint samples.
pub fn check_exercise2(fx: &Fixtures, seed: u64) -> Outcome {
    let data = &fx.exercise2;
    let run = || -> linmarg::Result<(usize, f64, f64)> {
        let grid = FrequencyGrid::new(0.1, 100.0, 2048)?;
        let prior = exercise2_prior();
        let scan = frequency_scan(data, &prior, &grid)?;
        if !scan.log_post_unnorm.iter().all(|v| v.is_finite()) {
            return Err(linmarg::Error::NonFinite { what: "scan" });
        }
        let draws = rejection_sample_omega(&scan, 64, seed)?;
        let joint = joint_posterior_samples(data, &prior, &draws, seed ^ 1)?;
        let (lo, hi) = (0..joint.len())
            .map(|i| joint.omega(i))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), w| (l.min(w), h.max(w)));
        Ok((joint.len(), lo, hi))
    };
    match run() {
        Ok((n, lo, hi)) if n == 64 && lo > 0.1 && hi < 100.0 => Outcome::pass(
            EXERCISE2,
            format!("{} rows, 64 joint samples with omega in [{lo:.3}, {hi:.3}]", data.len()),
        ),
        Ok((n, lo, hi)) => Outcome::fail(EXERCISE2, format!("{n} samples, omega range [{lo}, {hi}]"), &seed),
        Err(e) => Outcome::fail(EXERCISE2, e.to_string(), &seed),
    }
}

/// Runs every property and fixture check in a fixed order.
pub fn run_all(fx: &Fixtures, seed: u64, cases: usize) -> Vec<Outcome> {
    let mut out = vec![check_design(fx), check_exercise1(fx), check_exercise2(fx, seed)];
    out.push(check_identity(seed, cases));
    out.push(check_determinant(seed, cases));
    out.push(check_quadrature(seed, cases / 4));
    out.push(check_woodbury(seed, cases));
    out.push(check_sequential(seed, cases));
    out.push(check_wide_prior(seed, cases));
    if cases > 0 {
        out.push(check_calibration(&fx.exercise2, 1.27, seed));
    }
    out
}

pub fn verify(args: &VerifyArgs) -> CliResult<()> {
    let fx = match &args.fixtures {
        Some(dir) => Fixtures::from_dir(dir)?,
        None => Fixtures::bundled()?,
    };
    let start = Instant::now();
    let outcomes = run_all(&fx, args.seed, args.cases);
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed: Vec<&Outcome> = outcomes.iter().filter(|o| !o.passed).collect();
    println!(
        "{} of {} checks passed in {:.1} s (seed {}, {} cases)",
        outcomes.len() - failed.len(),
        outcomes.len(),
        start.elapsed().as_secs_f64(),
        args.seed,
        args.cases
    );
    match failed.first() {
        None => Ok(()),
        Some(first) => {
            eprintln!("first failing check: {}", first.name);
            if let Some(dump) = &first.dump {
                eprintln!("inputs:\n{dump}");
            }
            Err(CliError::Verification(format!(
                "{} check(s) failed, first: {}",
                failed.len(),
                first.name
            )))
        }
    }
}
