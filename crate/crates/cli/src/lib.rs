//! Command-line front end: CSV ingestion, configuration, orchestration and
//! JSON/CSV output bundles.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod output;

pub use commands::{execute, run, run_with_threads};
pub use config::Cli;
pub use error::{CliError, ErrorKind};
