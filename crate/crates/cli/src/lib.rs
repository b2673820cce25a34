//! Config-driven experiment harness around the `bqnpm` solvers: TOML
//! experiment files, versioned CSV traces, raw volume dumps and SVG plots.

// `!(a > b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod plot;
pub mod runner;
pub mod trace;
pub mod volume;

pub use config::{ExperimentConfig, SolverSpec};
pub use runner::{run_experiment, sweep, ExperimentReport, SolverRun};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver `{solver}` failed: {message}")]
    Solver { solver: String, message: String },
    #[error("trace error: {0}")]
    Trace(String),
    #[error("volume error: {0}")]
    Volume(String),
    #[error("plot error: {0}")]
    Plot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status: 2 for bad input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}
