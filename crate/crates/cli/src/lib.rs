//! Config-driven experiment runner for `dftns`.
//!
//! `dftns run <config.toml>` trains a DFT sampler, runs an MCMC baseline,
//! scores a sample file with KSD or runs the Bayesian logistic regression
//! comparison, and writes its artifacts into one output directory.

pub mod config;
pub mod error;
pub mod output;
pub mod runner;
pub mod svg;

pub use config::{Experiment, ExperimentConfig, Method, Preset};
pub use error::{CliError, Result};
pub use runner::{output_dir_for, resolve_options, run, run_sweep, RunOptions, RunReport, RunStatus};
