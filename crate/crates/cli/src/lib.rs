//! Command-line harness: file-level commands and the figure suites.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;

pub use config::{ExperimentConfig, ExperimentId, Method};
pub use error::CliError;
