//! Experiment runner: JSON configurations in, plot-ready CSV files and a
//! checksummed manifest out.

pub mod config;
pub mod error;
pub mod figures;
pub mod output;
pub mod runner;

pub use config::{ExperimentConfig, Mode};
pub use error::CliError;
pub use runner::{run, RunManifest};
