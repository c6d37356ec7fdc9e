//! File formats, configuration and the experiment driver behind the `ucdsc`
//! binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;

pub use error::CliError;
