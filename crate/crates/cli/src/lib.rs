//! Command-line front end for `advdesign`: config parsing, seeded runs and
//! file output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifact;
pub mod commands;
pub mod config;
pub mod error;

pub use error::{CliError, Result};
