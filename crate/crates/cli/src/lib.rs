//! Command-line front end: argument parsing and pipeline execution.

pub mod args;
pub mod run;

pub use args::{parse_args, Command, UsageError};
pub use run::{run, CliError, ExitStatus, Manifest, RunOutcome};
