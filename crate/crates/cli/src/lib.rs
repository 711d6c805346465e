//! Library side of the `pyroseason` command: configuration, the pipeline
//! stages, and the file formats they exchange.

pub mod config;
pub mod error;
pub mod export;
pub mod output;
pub mod run;
pub mod stages;

pub use config::PipelineConfig;
pub use error::{CliError, ErrorKind};
