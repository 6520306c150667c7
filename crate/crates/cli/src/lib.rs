//! Batch front-end for curvkit: job specs, target expressions, artifacts and
//! the shared check suites.

pub mod args;
pub mod commands;
pub mod error;
pub mod expr;
pub mod job;
pub mod suites;

pub use error::{exit, CliError, CliResult};
pub use job::JobSpec;
