//! Scenario files, command pipeline and verification for `meld-core`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod files;
pub mod pipeline;
pub mod verify;

pub use config::ScenarioConfig;
pub use error::CliError;
