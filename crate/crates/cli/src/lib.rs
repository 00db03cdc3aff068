//! Command-line front end for `caviar-core`: CSV ingestion, layered
//! configuration, subcommands and the empirical pipeline.

pub mod commands;
pub mod config;
pub mod empirical;
pub mod error;
pub mod ingest;

pub use commands::{run, Cli};
pub use error::{CliError, CliResult};
