//! Command-line front end for `lcirt`: design files, CSV datasets, result
//! files and the subcommands.

pub mod commands;
pub mod data;
pub mod design;
pub mod error;
pub mod output;
pub mod params;

pub use commands::{run, Cli, Command};
pub use error::{CliError, CliResult};
