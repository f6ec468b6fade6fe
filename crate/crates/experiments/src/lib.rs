//! Experiment harness for the `pmparis` smoother: skew-model bias studies on a
//! partially observed OU process, oracle agreement checks, and CSV/JSON output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod model;
pub mod report;
pub mod runs;
pub mod stats;

pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use report::{Check, Report, ResultRow, CSV_HEADER};
pub use runs::run;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Smoother(#[from] pmparis::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
}

impl Error {
    /// Process exit code: 2 for configuration and output problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io { .. } => 2,
            Error::Smoother(_) => 1,
        }
    }
}
