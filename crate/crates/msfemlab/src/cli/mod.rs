//! Command-line front end: configuration parsing, experiment orchestration
//! and file emission.
//!
//! Exit codes: 0 success, 1 numerical failure or violated identity
//! threshold, 2 usage error.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{build_config, help_text, read_config_file, Command, RunConfig};
pub use runner::run;
