//! File formats, configuration and run orchestration for the `ste` binary.

pub mod config;
pub mod error;
pub mod io;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, Mode};
pub use error::{CliError, Result};
pub use run::{run, RunOptions};
