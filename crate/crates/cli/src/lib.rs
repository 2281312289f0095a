//! Configuration, orchestration and artifact output for the `heatlab` binary.

pub mod config;
pub mod output;
pub mod run;
pub mod suite;

pub use config::{parse_config, parse_config_with, ConfigError, Override, RunConfig, Suite};
pub use run::{run, Command, Outcome, RunError};
