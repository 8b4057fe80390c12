//! Orchestration behind the `faultadapt` binary: seed-parallel runs,
//! on-disk artifacts and reports.

pub mod args;
pub mod artifacts;
pub mod commands;
pub mod error;
pub mod manifest;

pub use args::{Cli, Command};
pub use commands::execute;
pub use error::{CliError, Result};
