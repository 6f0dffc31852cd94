//! Data files, checkpoints, evaluation reports and the `oplearn` command line
//! on top of `oplearn-core`.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod format;
pub mod report;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use oplearn_core as core;
