//! Harness around `relflex-core`: run configuration, verification suites and the
//! timing/accuracy studies, all reporting CSV.

pub mod args;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod report;
pub mod stats;
pub mod studies;
pub mod verify;

pub use config::{parse_run_config, RunConfig};
pub use data::load_point_cloud;
pub use error::{CliError, CliResult};
