//! Configuration-driven experiment runner for `lipbarrier-core`.
//!
//! Each subcommand reads one JSON config, writes CSV/JSON reports into an
//! output directory and maps its result to an exit code (see [`ExitKind`]).

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use commands::{run, Command, Outcome};
pub use config::ExperimentConfig;
pub use error::{CliError, ExitKind};
