//! Command-line companion to `termsim-core`: dataset loading, binary
//! artifact formats, run configuration, the pipeline stages behind each
//! subcommand, and a deterministic synthetic dataset generator.

pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod wands;

pub use error::{CliError, Result};
