//! Configuration, orchestration and artifact output for the `hcf` binary.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod timeseries;

pub use commands::{CheckKind, Outcome};
pub use config::RunConfig;
pub use error::{CliError, Result};
