//! Configuration files, experiment presets, output writers and the
//! `harvestdiff` command line.

pub mod cli;
pub mod config;
pub mod output;
pub mod presets;
pub mod runner;

pub use config::{load_config, ConfigError, SimConfig};
pub use presets::{preset, PresetError};
pub use runner::{run, simulate_config, RunError};
