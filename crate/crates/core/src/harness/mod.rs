//! Experiment registry, configuration, CSV/JSON output and the command line.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod output;

pub use config::{Config, ConfigError};
pub use experiments::{find, run_experiment, Experiment, HarnessError, Report, Settings, REGISTRY};
pub use output::{to_csv, to_json, RunManifest, Table, Value};
