//! Configuration, file formats and subcommands for the burglary hotspot
//! models in `hotspot_core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod mesh_io;
pub mod output;
pub mod presets;

pub use error::{CliError, Result};
