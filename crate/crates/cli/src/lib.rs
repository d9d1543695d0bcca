//! Configuration, table output and experiment recipes behind the `vbc`
//! command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod recipes;

pub use config::Config;
pub use error::{CliError, CliResult};
