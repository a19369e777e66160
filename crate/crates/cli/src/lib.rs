//! Command-line front end for valguard.

pub mod cli;
pub mod config;
pub mod error;
pub mod run;

pub use error::CliError;
