//! Benchmark harness around the `subcubic` solver: dataset generation and
//! ingestion, deterministic multi-seed runs, variant comparisons, and
//! performance-profile computation. The binary is a thin argument layer over
//! the functions here.

use rayon::prelude::*;
use subcubic::driver::{run, ArcConfig, DriverError, Trace};
use subcubic::FiniteSumProblem;
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod io;

/// Harness errors carry the process exit code: bad inputs are `2`, numerical
/// breakdowns inside a run are `3`.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("numerical breakdown: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<DriverError> for CliError {
    fn from(e: DriverError) -> Self {
        // Driver errors are all mis-specification (bad config, bad data);
        // numerical breakdown shows up as `RunStatus::InnerFailure` on an
        // otherwise completed trace and is classified by the caller.
        CliError::Input(e.to_string())
    }
}

/// Runs one configuration over many seeds on a worker pool. Results come
/// back in seed order regardless of which worker finished first, so the
/// parallel fan-out is indistinguishable from a sequential loop.
pub fn run_many(
    problem: &FiniteSumProblem,
    cfg: &ArcConfig,
    seeds: &[u64],
) -> Result<Vec<Trace>, DriverError> {
    seeds
        .par_iter()
        .map(|&seed| run(problem, cfg, seed))
        .collect()
}
