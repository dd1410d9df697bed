//! Batch front end for the backreaction simulators: configuration documents,
//! `run`, `sweep` and `verify`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;
pub mod sweep;
pub mod verify;

pub use config::{emit_config, parse_config, ConfigError, RunConfig};
pub use run::{run, RunError, RunOutcome, Status};
pub use sweep::{sweep, Axis, SweepOutcome};
pub use verify::{verify, CheckStatus, Level, VerifyContext, VerifyReport};
