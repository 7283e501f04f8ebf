//! Scenario-driven front end to `rectenna-core`: scenario parsing, sweep
//! runners, CSV tables and SVG plots.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod quantity;
pub mod scenario;
pub mod svg;
pub mod table;

pub use commands::{compute, execute, render, verify, Command, Output, Report};
pub use error::CliError;
pub use scenario::Scenario;
pub use table::ResultTable;
