//! File formats, configuration, invariant suites and subcommands behind the
//! `tanhpolar` binary.

pub mod check;
pub mod classes;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use config::{BBoxSpec, Config};
pub use error::{exit, CliError, Result};
