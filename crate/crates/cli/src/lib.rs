//! File formats and commands around `rankdistill-core`: interaction logs,
//! split sidecars, checkpoints, configs, reports and run manifests.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod digest;
pub mod error;
pub mod ingest;
pub mod manifest;
pub mod report;
pub mod split;

pub use error::{CliResult, Failure};
