//! File formats, configuration, and pipeline orchestration around
//! `solvencylab-core`: CSV/JSON artifact IO, the TOML pipeline config with
//! dotted command-line overrides, and the stage-sequential batch pipeline.

pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
