//! File formats and commands of the `gpsteer` tool.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::large_enum_variant)]

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod files;
pub mod model;

pub use error::{CliError, CliResult};
