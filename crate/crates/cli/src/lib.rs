//! Library half of the `egreg` command-line tool.

pub mod args;
pub mod commands;
pub mod error;
pub mod io;
pub mod manifest;

pub use error::{CliError, Result};
