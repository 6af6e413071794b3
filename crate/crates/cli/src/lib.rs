//! Command layer over `plumeop-core`: resolved-config handling and the
//! subcommand implementations shared by the binary and the test suites.

pub mod commands;
pub mod config;

pub use plumeop_core::{Error, Result};
