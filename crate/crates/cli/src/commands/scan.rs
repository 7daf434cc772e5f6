use linmarg::{frequency_scan, Dataset64, FrequencyGrid, FrequencyScan64, LinearPrior64};
use serde::Serialize;

use super::{prepare_out_dir, resolve_prior};
use crate::args::{ModelKind, ScanArgs};
use crate::error::{CliError, CliResult};
use crate::io::{load_dataset, write_table};
use crate::report::{FileDigest, RunReport};

pub const SCAN_HEADER: [&str; 6] = [
    "omega",
    "log_marginal",
    "log_prior",
    "log_post_unnorm",
    "marginal_rescaled",
    "post_rescaled",
];

pub(crate) struct Prepared {
    pub data: Dataset64,
    pub prior: LinearPrior64,
    pub files: Vec<FileDigest>,
    pub scan: FrequencyScan64,
}

/// Loads inputs and runs the grid evaluation shared by `scan-frequency` and `sample`.
pub(crate) fn prepare(args: &ScanArgs) -> CliResult<Prepared> {
    if args.model != ModelKind::Sinusoid {
        return Err(CliError::Validation("frequency scans need --model sinusoid".into()));
    }
    let data = load_dataset(&args.data)?;
    let mut files = vec![FileDigest::of("data", &args.data)?];
    let prior = resolve_prior(&args.prior, 3, &mut files)?;
    let grid = FrequencyGrid::new(args.omega_min, args.omega_max, args.grid)?;
    let scan = frequency_scan(&data, &prior, &grid)?;
    Ok(Prepared {
        data,
        prior,
        files,
        scan,
    })
}

fn column_max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Serialize)]
struct ScanOutputs {
    grid_points: usize,
    max_log_marginal: f64,
    omega_at_max_marginal: f64,
    max_log_post_unnorm: f64,
    omega_at_max_posterior: f64,
    files: Vec<String>,
}

pub fn scan_frequency(args: &ScanArgs) -> CliResult<()> {
    let Prepared { files, scan, .. } = prepare(args)?;
    prepare_out_dir(&args.out)?;
    let (max_m, max_p) = (column_max(&scan.log_marginal), column_max(&scan.log_post_unnorm));
    let rows = (0..scan.len()).map(|g| {
        [
            scan.omegas[g],
            scan.log_marginal[g],
            scan.log_prior[g],
            scan.log_post_unnorm[g],
            (scan.log_marginal[g] - max_m).exp(),
            (scan.log_post_unnorm[g] - max_p).exp(),
        ]
    });
    write_table(&args.out.join("scan.csv"), &SCAN_HEADER, rows)?;
    let im = scan.argmax_marginal().ok_or(linmarg::Error::DegenerateScan)?;
    let ip = scan.argmax_posterior().ok_or(linmarg::Error::DegenerateScan)?;
    let outputs = ScanOutputs {
        grid_points: scan.len(),
        max_log_marginal: max_m,
        omega_at_max_marginal: scan.omegas[im],
        max_log_post_unnorm: max_p,
        omega_at_max_posterior: scan.omegas[ip],
        files: vec!["scan.csv".into(), "scan.json".into()],
    };
    RunReport::new("scan-frequency", None, files, args)?
        .with_outputs(outputs)?
        .write(&args.out.join("scan.json"))
}
