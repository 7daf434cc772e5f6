mod fit_linear;
mod sample;
mod scan;

use std::fs;
use std::path::Path;

use linmarg::LinearPrior64;
use nalgebra::{DMatrix, DVector};

pub use fit_linear::fit_linear;
pub use sample::sample;
pub use scan::scan_frequency;

use crate::args::PriorArgs;
use crate::error::{CliError, CliResult};
use crate::io::{load_matrix, parse_list};
use crate::report::FileDigest;

/// Points plotted per curve.
pub const CURVE_POINTS: usize = 256;

pub(crate) fn prepare_out_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Builds the prior from `--prior-mean` and `--prior-var`, recording a hash if the variance is a file.
pub(crate) fn resolve_prior(args: &PriorArgs, k: usize, files: &mut Vec<FileDigest>) -> CliResult<LinearPrior64> {
    let mean_text = args
        .prior_mean
        .as_deref()
        .ok_or_else(|| CliError::Validation("--prior-mean is required unless --improper-prior is given".into()))?;
    let var_text = args
        .prior_var
        .as_deref()
        .ok_or_else(|| CliError::Validation("--prior-var is required unless --improper-prior is given".into()))?;
    let mean = parse_list("--prior-mean", mean_text)?;
    if mean.len() != k {
        return Err(CliError::Validation(format!(
            "--prior-mean has {} entries but the model has {k} parameters",
            mean.len()
        )));
    }
    let mean = DVector::from_vec(mean);
    let var_path = Path::new(var_text);
    let prior = if var_path.is_file() {
        files.push(FileDigest::of("prior_covariance", var_path)?);
        let cov = load_matrix(var_path)?;
        if cov.nrows() != k {
            return Err(CliError::Validation(format!(
                "{var_text}: covariance is {}x{} but the model has {k} parameters",
                cov.nrows(),
                cov.ncols()
            )));
        }
        LinearPrior64::from_covariance(mean, &cov)
    } else {
        let var = parse_list("--prior-var", var_text)?;
        if var.len() != k {
            return Err(CliError::Validation(format!(
                "--prior-var has {} entries but the model has {k} parameters",
                var.len()
            )));
        }
        LinearPrior64::from_variances(mean, &DVector::from_vec(var))
    };
    prior.map_err(|e| CliError::Validation(format!("prior: {e}")))
}

/// `count` evenly spaced points spanning the data with 10% padding on each side.
pub(crate) fn curve_grid(x: &DVector<f64>, count: usize) -> DVector<f64> {
    let lo = x.min();
    let hi = x.max();
    let pad = if hi > lo { 0.1 * (hi - lo) } else { 1.0 };
    let (lo, hi) = (lo - pad, hi + pad);
    DVector::from_fn(count, |i, _| lo + (hi - lo) * i as f64 / (count - 1) as f64)
}

/// Linear-interpolation quantile of an ascending slice.
pub(crate) fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let i = h.floor() as usize;
    if i + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[i] + (h - i as f64) * (sorted[i + 1] - sorted[i])
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
