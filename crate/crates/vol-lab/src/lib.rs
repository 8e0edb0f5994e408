//! Experiment harness: reads a TOML experiment description, runs it on the
//! `bachelier-sv` engine and writes CSV tables with plot files.

pub mod config;
pub mod experiments;
pub mod plot;
pub mod table;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind};
pub use experiments::{run, ExperimentOutput, RunError};
pub use table::ResultTable;
