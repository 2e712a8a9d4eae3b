//! Scenario files, reports and the `gkz` command-line driver built on `gkz-core`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod report;
pub mod run;
pub mod scenario_file;

pub use error::CliError;
