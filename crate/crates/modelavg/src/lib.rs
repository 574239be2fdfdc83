//! File formats, experiment configuration and the command-line runner
//! around [`modelavg_core`].

pub mod audit;
pub mod config;
pub mod data;
mod error;
pub mod executor;
pub mod experiment;
pub mod instances;
pub mod plan;

pub use error::CliError;
pub use modelavg_core as core;
