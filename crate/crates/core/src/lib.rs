//! Exact refactorization of a Gaussian likelihood that is linear in some
//! parameters, times a Gaussian prior on those parameters, into a Gaussian
//! posterior times a Gaussian marginalized likelihood.
//!
//! ```text
//! N(y | M·θ, C) · N(θ | μ, Λ) = N(θ | a, A) · N(y | b, B)
//! ```
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix it to `f64`, which is what the tolerances in the
//! test suites assume.
//!
//! Modules:
//! - [`gaussian`]: moment and canonical Gaussians, Cholesky solves, log-densities, sampling.
//! - [`refactor`]: the refactorization itself, with inversion-lemma and determinant-lemma fast paths.
//! - [`sequential`]: folding independent data blocks one at a time.
//! - [`models`]: polynomial and sinusoid design matrices.
//! - [`sampling`]: frequency scans and rejection sampling over one nonlinear parameter.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod gaussian;
pub mod models;
pub mod noise;
pub mod refactor;
pub mod sampling;
pub mod scalar;
pub mod sequential;

pub use data::Dataset;
pub use error::{Error, Result};
pub use gaussian::{GaussianCanonical, GaussianMoment, SpdFactor};
pub use models::{polynomial_design, sinusoid_design, DesignKind, DesignSpec};
pub use noise::{NoiseSpec, PreparedNoise};
pub use refactor::{
    log_marginal_likelihood, logdet_b, posterior, refactor, refactor_in, refactor_scalar, woodbury_apply,
    EvaluationSpace, LinearGaussianModel, LinearPrior, LogMarginal, Refactorization, ScalarRefactorization,
};
pub use sampling::{
    frequency_scan, joint_posterior_samples, log_uniform_prior, rejection_sample_omega, FrequencyGrid, FrequencyScan,
    JointSamples, OmegaDraws, RejectionConfig,
};
pub use scalar::Scalar;
pub use sequential::{
    sequential_init, sequential_run, sequential_update, DataBlock, Evidence, SequentialRun, SequentialState,
};

pub type Dataset64 = Dataset<f64>;
pub type GaussianMoment64 = GaussianMoment<f64>;
pub type GaussianCanonical64 = GaussianCanonical<f64>;
pub type SpdFactor64 = SpdFactor<f64>;
pub type NoiseSpec64 = NoiseSpec<f64>;
pub type LinearGaussianModel64 = LinearGaussianModel<f64>;
pub type LinearPrior64 = LinearPrior<f64>;
pub type Refactorization64 = Refactorization<f64>;
pub type DataBlock64 = DataBlock<f64>;
pub type SequentialState64 = SequentialState<f64>;
pub type FrequencyScan64 = FrequencyScan<f64>;
pub type JointSamples64 = JointSamples<f64>;

pub type GaussianMoment32 = GaussianMoment<f32>;
pub type LinearGaussianModel32 = LinearGaussianModel<f32>;
