use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "linmarg",
    version,
    about = "Linear-Gaussian fits with analytically marginalized likelihoods"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Posterior and marginal likelihood of a model linear in its parameters.
    FitLinear(FitLinearArgs),
    /// Marginal likelihood and posterior of the sinusoid frequency on a log-spaced grid.
    ScanFrequency(ScanArgs),
    /// Joint posterior samples of the sinusoid amplitudes and frequency.
    Sample(SampleArgs),
    /// Checks the numerical invariants on random instances and the bundled fixtures.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Polynomial,
    Sinusoid,
}

/// Prior flags shared by every fitting command.
#[derive(Debug, Clone, Args, Serialize)]
pub struct PriorArgs {
    /// Prior mean, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub prior_mean: Option<String>,
    /// Prior variances as a comma-separated list, or a CSV file holding the full covariance.
    #[arg(long)]
    pub prior_var: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitLinearArgs {
    /// CSV with header x,y,sigma_y.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelKind::Polynomial)]
    pub model: ModelKind,
    /// Polynomial degree.
    #[arg(long, default_value_t = 2, allow_hyphen_values = true)]
    pub degree: i64,
    /// Frequency for the sinusoid model.
    #[arg(long)]
    pub omega: Option<f64>,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Infinitely wide prior; the marginal likelihood is then undefined.
    #[arg(long, conflicts_with_all = ["prior_mean", "prior_var"])]
    pub improper_prior: bool,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Write this many posterior draws to samples.csv.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Seed of the random stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScanArgs {
    /// CSV with header x,y,sigma_y.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelKind::Sinusoid)]
    pub model: ModelKind,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long, default_value_t = 0.1)]
    pub omega_min: f64,
    #[arg(long, default_value_t = 100.0)]
    pub omega_max: f64,
    /// Number of log-spaced frequencies, endpoints included.
    #[arg(long, default_value_t = 16384)]
    pub grid: usize,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    pub scan: ScanArgs,
    /// Number of joint (theta, omega) draws.
    #[arg(long, default_value_t = 512)]
    pub samples: usize,
    /// Seed of the random stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Proposal budget of the rejection sampler.
    #[arg(long, default_value_t = linmarg::sampling::MAX_PROPOSALS)]
    pub max_proposals: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// Seed of the random stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random instances per property.
    #[arg(long, default_value_t = 200)]
    pub cases: usize,
    /// Directory with exercise1.csv, exercise2.csv and exercise1_expected.json;
    /// the bundled copies are used when omitted.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
}
