//! Experiment driver for the periodized Gaussian isoperimetry lab: config
//! parsing, the five experiments, and CSV emission.

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

pub use config::{Experiment, ExperimentConfig};
pub use error::CliError;
pub use experiments::{run, Outcome};
