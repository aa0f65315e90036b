//! Config-driven batch commands and their reports.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{build_witness, run_command, Command};
pub use config::{ExperimentConfig, OutputFormat, SCHEMA_VERSION};
pub use report::{Relation, Report, Row, Summary};
