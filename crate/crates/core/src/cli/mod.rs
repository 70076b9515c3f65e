//! Reproducible command runs driven by one TOML config.
//!
//! Resolution order: built-in defaults, then `--config`, then each
//! `--set key=value`, then `--seed` / `--out`. Every run writes its resolved
//! config to `<out>/<command>-<timestamp>-seed<seed>/config.toml`; passing
//! that file back as `--config` repeats the run.

mod commands;
mod config;

use std::path::Path;

pub use commands::{execute, resolve_dataset, resolve_taxonomy, Command, Outcome};
pub use config::{
    run_dir, AugmentSection, ConfigBuilder, DataSection, EvalSection, RunConfig, TrainSection,
};

use crate::error::Result;

/// Builds the config for one invocation.
pub fn resolve_config(config: Option<&Path>, sets: &[String], seed: Option<u64>, out: Option<&Path>) -> Result<RunConfig> {
    let mut builder = match config {
        Some(path) => ConfigBuilder::from_file(path)?,
        None => ConfigBuilder::new(),
    };
    for s in sets {
        builder.set(s)?;
    }
    if let Some(seed) = seed {
        builder.set_value("seed", toml::Value::Integer(seed as i64));
    }
    if let Some(out) = out {
        builder.set_value("out", toml::Value::String(out.display().to_string()));
    }
    builder.build()
}
