use linmarg::sampling::{rejection_sample_omega_with, RejectionConfig};
use linmarg::{joint_posterior_samples, sinusoid_design};
use nalgebra::DVector;
use serde::Serialize;

use super::scan::{prepare, Prepared};
use super::{curve_grid, matrix_rows, prepare_out_dir, CURVE_POINTS};
use crate::args::SampleArgs;
use crate::error::{CliError, CliResult};
use crate::io::{fmt_f64, write_records, write_table};
use crate::report::RunReport;

/// Curves over-plotted in curves.csv.
pub const CURVE_COUNT: usize = 64;

/// Mixed into `--seed` for the amplitude stream so it differs from the frequency stream.
const THETA_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Serialize)]
struct SampleOutputs {
    samples: usize,
    omega_seed: u64,
    theta_seed: u64,
    proposals: u64,
    acceptance_rate: f64,
    curve_count: usize,
    files: Vec<String>,
}

pub fn sample(args: &SampleArgs) -> CliResult<()> {
    if args.samples == 0 {
        return Err(CliError::Validation("--samples must be at least 1".into()));
    }
    let Prepared {
        data,
        prior,
        files,
        scan,
    } = prepare(&args.scan)?;
    let config = RejectionConfig {
        max_proposals: args.max_proposals,
        ..RejectionConfig::default()
    };
    let draws = rejection_sample_omega_with(&scan, args.samples, args.seed, config)?;
    let theta_seed = args.seed ^ THETA_STREAM;
    let joint = joint_posterior_samples(&data, &prior, &draws, theta_seed)?;

    let out = &args.scan.out;
    prepare_out_dir(out)?;
    write_table(
        &out.join("joint_samples.csv"),
        &["alpha", "beta", "gamma", "omega"],
        matrix_rows(&joint.rows),
    )?;
    write_table(
        &out.join("projection.csv"),
        &["alpha", "ln_omega"],
        (0..joint.len()).map(|i| [joint.rows[(i, 0)], joint.omega(i).ln()]),
    )?;

    let xs = curve_grid(data.x(), CURVE_POINTS);
    let n_curves = CURVE_COUNT.min(joint.len());
    let mut rows = Vec::with_capacity(n_curves * xs.len());
    for c in 0..n_curves {
        // Draws are exchangeable, so an evenly strided subset is a fair one.
        let i = c * joint.len() / n_curves;
        let curve: DVector<f64> = sinusoid_design(&xs, joint.omega(i))? * joint.theta(i);
        for (x, y) in xs.iter().zip(curve.iter()) {
            rows.push(vec![c.to_string(), i.to_string(), fmt_f64(*x), fmt_f64(*y)]);
        }
    }
    write_records(&out.join("curves.csv"), &["curve_id", "sample_index", "x", "y"], rows)?;

    let outputs = SampleOutputs {
        samples: joint.len(),
        omega_seed: draws.seed,
        theta_seed,
        proposals: draws.proposals,
        acceptance_rate: draws.acceptance_rate(),
        curve_count: n_curves,
        files: ["joint_samples.csv", "projection.csv", "curves.csv", "sample.json"]
            .map(String::from)
            .to_vec(),
    };
    RunReport::new("sample", Some(args.seed), files, args)?
        .with_outputs(outputs)?
        .write(&out.join("sample.json"))
}
