//! Configuration ingestion, command execution and CSV/JSON output for the
//! `dplqr` command-line tool.

pub mod commands;
pub mod config;
pub mod output;
pub mod summary;

pub use commands::{execute, run, CliError, Command, Outcome, Overrides};
pub use config::{parse_config, parse_str, ConfigErrors, ConfigIssue, RunConfig, PAPER_CONFIG};
