//! Resolution of command settings: profile defaults, then the `--config`
//! file, then explicit flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use ofdmim_core::channel::OutageMode;
use ofdmim_core::oracle::SystemConfig;
use ofdmim_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// 1000 train / 200 validation records, 2x64 hidden, 1e4 epochs.
    #[default]
    Desk,
    /// 6561 train / 1000 validation records, 6x128 hidden, 1e5 epochs.
    Paper,
}

/// Flags shared by every command that builds a [`SystemConfig`].
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct SystemFlags {
    /// Subcarriers per block.
    #[arg(long)]
    pub n: Option<usize>,
    /// Active subcarriers per block.
    #[arg(long)]
    pub t: Option<usize>,
    /// PSK order.
    #[arg(long)]
    pub m: Option<usize>,
    /// SNR outage threshold (linear).
    #[arg(long)]
    pub s: Option<f64>,
    /// Outage probability cap.
    #[arg(long = "psi-th")]
    pub psi_th: Option<f64>,
    #[arg(long = "pt-max")]
    pub pt_max: Option<f64>,
    #[arg(long = "pr-max")]
    pub pr_max: Option<f64>,
    /// single-sap or sap-averaged.
    #[arg(long = "outage-mode")]
    pub outage_mode: Option<OutageMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSettings {
    pub n: usize,
    pub t: usize,
    pub m: usize,
    pub s: f64,
    pub psi_th: f64,
    pub pt_max: f64,
    pub pr_max: f64,
    pub outage_mode: OutageMode,
}

impl Default for SystemSettings {
    fn default() -> Self {
        let c = SystemConfig::default();
        Self {
            n: c.n,
            t: c.t,
            m: c.m,
            s: c.s,
            psi_th: c.psi_th,
            pt_max: c.pt_max,
            pr_max: c.pr_max,
            outage_mode: c.outage_mode,
        }
    }
}

impl SystemSettings {
    pub fn config(&self) -> Result<SystemConfig> {
        let c = SystemConfig {
            n: self.n,
            t: self.t,
            m: self.m,
            s: self.s,
            psi_th: self.psi_th,
            pt_max: self.pt_max,
            pr_max: self.pr_max,
            outage_mode: self.outage_mode,
        };
        c.validate()?;
        Ok(c)
    }
}

/// Training flags shared by `train` and `sweep`.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct TrainFlags {
    #[arg(long = "hidden-layers")]
    pub hidden_layers: Option<usize>,
    /// Neurons per hidden layer.
    #[arg(long)]
    pub neurons: Option<usize>,
    /// Drop bias terms.
    #[arg(long = "no-bias", num_args = 0, default_missing_value = "false")]
    #[serde(rename = "use_bias")]
    pub no_bias: Option<bool>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    /// Adam step size.
    #[arg(long = "step-size")]
    pub step_size: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "snapshot-every")]
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub hidden_layers: usize,
    pub neurons: usize,
    pub use_bias: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub snapshot_every: usize,
}

impl TrainSettings {
    pub fn for_profile(profile: Profile) -> Self {
        let (hidden_layers, neurons, epochs) = match profile {
            Profile::Desk => (2, 64, 10_000),
            Profile::Paper => (6, 128, 100_000),
        };
        let adam = ofdmim_core::neural::AdamConfig::default();
        Self {
            hidden_layers,
            neurons,
            use_bias: true,
            epochs,
            batch_size: ofdmim_core::training::DEFAULT_BATCH_SIZE,
            step_size: adam.step_size,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            snapshot_every: ofdmim_core::training::DEFAULT_SNAPSHOT_EVERY,
        }
    }

    pub fn layer_dims(&self, width: usize) -> Vec<usize> {
        let mut dims = vec![4 * width];
        dims.extend(std::iter::repeat(self.neurons).take(self.hidden_layers));
        dims.push(2 * width);
        dims
    }

    pub fn training_config(&self, shuffle_seed: u64) -> ofdmim_core::training::TrainingConfig {
        ofdmim_core::training::TrainingConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: ofdmim_core::neural::AdamConfig {
                step_size: self.step_size,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.epsilon,
            },
            shuffle_seed,
            snapshot_every: self.snapshot_every,
        }
    }
}

fn strip_nulls(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            Value::Object(map.into_iter().filter(|(_, v)| !v.is_null()).map(|(k, v)| (k, strip_nulls(v))).collect())
        }
        other => other,
    }
}

fn overlay(base: &mut Map<String, Value>, top: Map<String, Value>, source: &str) -> Result<()> {
    for (k, v) in top {
        if !base.contains_key(&k) {
            return Err(Error::InvalidArguments(format!("unknown setting {k:?} in {source}")));
        }
        base.insert(k, v);
    }
    Ok(())
}

fn as_object(v: Value, source: &str) -> Result<Map<String, Value>> {
    match v {
        Value::Object(m) => Ok(m),
        _ => Err(Error::InvalidArguments(format!("{source} must be a JSON object"))),
    }
}

/// Reads a `--config` file: either a settings object or a run manifest, in
/// which case its `settings` member is used.
pub fn read_config_file(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let mut map = as_object(value, "config file")?;
    if map.contains_key("command") && map.contains_key("settings") {
        map = as_object(map.remove("settings").unwrap_or(Value::Null), "manifest settings")?;
    }
    Ok(map)
}

/// `defaults ← config file ← flags`, rejecting keys the defaults lack.
pub fn resolve<S, F>(defaults: &S, file: Option<Map<String, Value>>, flags: &F) -> Result<S>
where
    S: Serialize + DeserializeOwned,
    F: Serialize,
{
    let ser = |e: serde_json::Error| Error::Internal(format!("settings encoding: {e}"));
    let mut merged = as_object(serde_json::to_value(defaults).map_err(ser)?, "defaults")?;
    if let Some(file) = file {
        overlay(&mut merged, file, "config file")?;
    }
    let flags = as_object(strip_nulls(serde_json::to_value(flags).map_err(ser)?), "flags")?;
    overlay(&mut merged, flags, "flags")?;
    serde_json::from_value(Value::Object(merged)).map_err(|e| Error::InvalidArguments(format!("settings: {e}")))
}

/// Profile named by the flag, else by the config file, else desk.
pub fn pick_profile(flag: Option<Profile>, file: &Option<Map<String, Value>>) -> Result<Profile> {
    if let Some(p) = flag {
        return Ok(p);
    }
    match file.as_ref().and_then(|m| m.get("profile")) {
        None => Ok(Profile::Desk),
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| Error::InvalidArguments(format!("profile: {e}"))),
    }
}

pub fn require_path(p: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    p.clone().ok_or_else(|| Error::InvalidArguments(format!("{flag} is required")))
}
