use std::path::{Path, PathBuf};
use std::time::Instant;

use ofdmim_core::io::write_atomic;
use ofdmim_core::{Error, Result};
use serde::Serialize;
use serde_json::Value;

/// Record of one run, written next to its outputs. `settings` is the fully
/// resolved configuration; feeding the manifest back through `--config`
/// repeats the run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub settings: Value,
    pub seeds: Value,
    pub artifacts: Vec<PathBuf>,
    pub results: Value,
    pub wall_clock_secs: f64,
}

pub struct ManifestBuilder {
    command: &'static str,
    settings: Value,
    start: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &'static str, settings: &impl Serialize) -> Result<Self> {
        Ok(Self { command, settings: to_value(settings)?, start: Instant::now() })
    }

    pub fn write(self, path: &Path, seeds: Value, artifacts: Vec<PathBuf>, results: Value) -> Result<()> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            settings: self.settings,
            seeds,
            artifacts,
            results,
            wall_clock_secs: self.start.elapsed().as_secs_f64(),
        };
        let mut text =
            serde_json::to_string_pretty(&manifest).map_err(|e| Error::Internal(format!("manifest encoding: {e}")))?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

pub fn to_value(v: &impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Internal(format!("encoding: {e}")))
}

/// `<path>.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}
