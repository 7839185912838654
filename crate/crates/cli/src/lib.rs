//! Command-line front end: joint-density grids, marginals, visibility scans
//! and thermal estimates, each written with a manifest of its outputs.

pub mod app;
pub mod commands;
pub mod error;
pub mod output;
pub mod presets;

pub use error::CliError;
