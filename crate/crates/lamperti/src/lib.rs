//! Command-line driver and file formats for `lamperti-core`: TOML experiment configs,
//! CSV/JSON reports, Brownian path dumps and rayon-parallel Monte Carlo.

pub mod commands;
pub mod config;
pub mod io;
pub mod parallel;
pub mod presets;

pub use lamperti_core as core;
