//! Command-line driver: config parsing, command dispatch and run persistence.

pub mod commands;
pub mod config;
pub mod error;
pub mod run;

pub use commands::{run_command, Command, RunOutput};
pub use config::{parse_config, Config, Resolved};
pub use error::{CliError, CliResult};
pub use run::{RunDir, RunManifest};
