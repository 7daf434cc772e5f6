use linmarg::{refactor, DesignSpec, EvaluationSpace, LinearGaussianModel64, LinearPrior64, LogMarginal};
use serde::Serialize;

use super::{curve_grid, matrix_rows, prepare_out_dir, quantile, resolve_prior, CURVE_POINTS};
use crate::args::{FitLinearArgs, ModelKind};
use crate::error::{CliError, CliResult};
use crate::io::{load_dataset, write_table};
use crate::report::{FileDigest, RunReport};

/// Fewest draws behind the credible band. With `--samples n` the band uses
/// `max(n, BAND_DRAWS)` draws and samples.csv holds the first `n` of them.
const BAND_DRAWS: usize = 4096;

#[derive(Serialize)]
struct FitOutputs {
    column_names: Vec<String>,
    n_data: usize,
    evaluation_space: EvaluationSpace,
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
    log_marginal: LogMarginal<f64>,
    band_draws: usize,
    files: Vec<String>,
}

pub fn fit_linear(args: &FitLinearArgs) -> CliResult<()> {
    let data = load_dataset(&args.data)?;
    let mut files = vec![FileDigest::of("data", &args.data)?];
    let spec = match args.model {
        ModelKind::Polynomial => {
            if args.degree < 0 {
                return Err(linmarg::Error::InvalidDegree(args.degree).into());
            }
            DesignSpec::polynomial(args.degree as usize)
        }
        ModelKind::Sinusoid => {
            let omega = args
                .omega
                .ok_or_else(|| CliError::Validation("--model sinusoid needs --omega".into()))?;
            DesignSpec::sinusoid(omega)
        }
    };
    let k = spec.n_params();
    let design = spec.build(data.x())?;
    let prior = if args.improper_prior {
        LinearPrior64::improper(k)
    } else {
        resolve_prior(&args.prior, k, &mut files)?
    };
    let model = LinearGaussianModel64::from_prior(design, data.noise(), &prior)?;
    let r = refactor(&model, data.y())?;

    prepare_out_dir(&args.out)?;
    if args.samples == Some(0) {
        return Err(CliError::Validation("--samples must be at least 1".into()));
    }
    let draws_n = args.samples.unwrap_or(0).max(BAND_DRAWS);
    let draws = r.posterior().sample(draws_n, args.seed)?;
    let mut written = Vec::new();
    if let Some(n) = args.samples {
        let header: Vec<String> = (1..=k).map(|i| format!("theta_{i}")).collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        write_table(
            &args.out.join("samples.csv"),
            &header,
            matrix_rows(&draws.rows(0, n).into_owned()),
        )?;
        written.push("samples.csv".to_string());
    }

    let xs = curve_grid(data.x(), CURVE_POINTS);
    let grid_design = spec.build(&xs)?;
    let map = &grid_design * r.a();
    let curves = &grid_design * draws.transpose();
    let rows = (0..xs.len()).map(|i| {
        let mut values: Vec<f64> = curves.row(i).iter().copied().collect();
        values.sort_by(f64::total_cmp);
        [xs[i], map[i], quantile(&values, 0.16), quantile(&values, 0.84)]
    });
    write_table(&args.out.join("fit_curve.csv"), &["x", "map", "lower", "upper"], rows)?;
    written.push("fit_curve.csv".to_string());
    written.push("posterior.json".to_string());

    let outputs = FitOutputs {
        column_names: spec.column_names.clone(),
        n_data: data.len(),
        evaluation_space: r.space(),
        mean: r.a().iter().copied().collect(),
        covariance: matrix_rows(r.a_cov()),
        log_marginal: r.log_marginal(),
        band_draws: draws_n,
        files: written,
    };
    RunReport::new("fit-linear", Some(args.seed), files, args)?
        .with_outputs(outputs)?
        .write(&args.out.join("posterior.json"))
}
