use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VERIFICATION: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const ENVELOPE: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: u64,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(
        "rejection sampler gave up after {proposals} proposals with {accepted} of {requested} accepted \
         (acceptance rate {rate:.3e})"
    )]
    Envelope {
        proposals: u64,
        accepted: usize,
        requested: usize,
        rate: f64,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) | CliError::Io { .. } => exit::VALIDATION,
            CliError::Numerical(_) => exit::NUMERICAL,
            CliError::Envelope { .. } => exit::ENVELOPE,
            CliError::Verification(_) => exit::VERIFICATION,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<linmarg::Error> for CliError {
    fn from(e: linmarg::Error) -> Self {
        use linmarg::Error as E;
        match e {
            E::EnvelopeTooLoose {
                proposals,
                accepted,
                requested,
            } => CliError::Envelope {
                proposals,
                accepted,
                requested,
                rate: if proposals == 0 {
                    0.0
                } else {
                    accepted as f64 / proposals as f64
                },
            },
            E::NonPositiveDefinite { .. } | E::SingularPosterior | E::ImproperMarginal | E::DegenerateScan => {
                CliError::Numerical(e.to_string())
            }
            E::NonFinite { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
