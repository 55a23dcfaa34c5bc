//! File formats, configuration and subcommands around `mstp-core`.

pub mod archive;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod maps;
pub mod report;
pub mod scenario;
pub mod truth;
pub mod validation;

pub use config::RunConfig;
pub use error::{CliError, Result};
