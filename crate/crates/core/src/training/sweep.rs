use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{normalization_for, train, TrainingConfig, TrainingHistory};
use crate::dataset::{build_dataset, split, Dataset, GenerationParams};
use crate::error::{Error, Result};
use crate::neural::init_mlp;
use crate::oracle::SystemConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// Neurons per hidden layer, layer count fixed.
    Neurons,
    /// Hidden layer count, neurons per layer fixed.
    Layers,
    /// Outage cap; every grid point gets its own labeled data.
    OutageThreshold,
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepKind::Neurons => "neurons",
            SweepKind::Layers => "layers",
            SweepKind::OutageThreshold => "outage-threshold",
        })
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neurons" => Ok(SweepKind::Neurons),
            "layers" => Ok(SweepKind::Layers),
            "outage-threshold" | "outage" => Ok(SweepKind::OutageThreshold),
            _ => Err(Error::invalid(format!("unknown sweep kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
    /// Independent runs per grid point, each with its own data draw and
    /// initialization.
    pub repeats: usize,
    pub base_seed: u64,
    pub hidden_layers: usize,
    pub neurons: usize,
    pub use_bias: bool,
    pub training: TrainingConfig,
    pub config: SystemConfig,
}

/// Where sweep runs get their data.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum SweepData {
    /// One split shared by every run. Not usable for outage sweeps.
    Fixed { train: Dataset, validation: Dataset },
    /// Generated per repeat (and per grid point for outage sweeps).
    Generate { params: GenerationParams, validation_count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub grid_index: usize,
    pub value: f64,
    pub repeat: usize,
    pub data_seed: Option<u64>,
    pub init_seed: u64,
    pub shuffle_seed: u64,
    pub layer_dims: Vec<usize>,
    pub history: TrainingHistory,
}

impl SweepRun {
    pub fn id(&self) -> String {
        format!("g{}-r{}", self.grid_index, self.repeat)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub runs: Vec<SweepRun>,
    /// Per grid point, the snapshot-wise mean over repeats.
    pub averaged: Vec<(f64, TrainingHistory)>,
}

/// SplitMix64 folded over `parts`, for child seeds that stay independent of
/// run order.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

const DATA_STREAM: u64 = 1;
const SPLIT_STREAM: u64 = 2;
const INIT_STREAM: u64 = 3;
const SHUFFLE_STREAM: u64 = 4;

fn positive_integer(value: f64, what: &str) -> Result<usize> {
    if value >= 1.0 && value.fract() == 0.0 && value <= 1e6 {
        Ok(value as usize)
    } else {
        Err(Error::invalid(format!("{what} must be a positive integer, got {value}")))
    }
}

impl SweepSpec {
    fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::invalid("sweep grid is empty"));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("repeats must be at least 1"));
        }
        self.config.validate()?;
        for &v in &self.grid {
            self.point(v)?;
        }
        Ok(())
    }

    /// `(hidden layers, neurons, config)` of one grid point.
    fn point(&self, value: f64) -> Result<(usize, usize, SystemConfig)> {
        Ok(match self.kind {
            SweepKind::Neurons => (self.hidden_layers, positive_integer(value, "neurons")?, self.config.clone()),
            SweepKind::Layers => (positive_integer(value, "layers")?, self.neurons, self.config.clone()),
            SweepKind::OutageThreshold => {
                let config = SystemConfig { psi_th: value, ..self.config.clone() };
                config.validate()?;
                (self.hidden_layers, self.neurons, config)
            }
        })
    }
}

type Split = (Dataset, Dataset, Option<u64>);

fn generated(params: &GenerationParams, validation_count: usize, config: &SystemConfig, seed: u64) -> Result<Split> {
    let data_seed = derive_seed(seed, &[DATA_STREAM]);
    let p = GenerationParams { seed: data_seed, ..params.clone() };
    let ds = build_dataset(&p, config)?;
    let (train, validation) = split(&ds, validation_count, derive_seed(seed, &[SPLIT_STREAM]))?;
    Ok((train, validation, Some(data_seed)))
}

/// One training run per `(grid point, repeat)`, executed in parallel.
///
/// Data for repeat `r` comes from a seed derived from `(base_seed, r)` and
/// is shared across architecture grid points; outage sweeps label a fresh
/// dataset per `(grid point, r)`. Initialization and shuffling seeds are
/// derived from `(base_seed, grid index, r)`.
pub fn sweep(spec: &SweepSpec, data: &SweepData) -> Result<SweepResult> {
    spec.validate()?;
    let per_point = spec.kind == SweepKind::OutageThreshold;
    if per_point && matches!(data, SweepData::Fixed { .. }) {
        return Err(Error::invalid("an outage sweep needs generated data"));
    }

    // Data key: (grid index or 0, repeat).
    let mut splits: BTreeMap<(usize, usize), Split> = BTreeMap::new();
    for (i, &value) in spec.grid.iter().enumerate() {
        let key_i = if per_point { i } else { 0 };
        let config = spec.point(value)?.2;
        for r in 0..spec.repeats {
            if splits.contains_key(&(key_i, r)) {
                continue;
            }
            let s = match data {
                SweepData::Fixed { train, validation } => (train.clone(), validation.clone(), None),
                SweepData::Generate { params, validation_count } => {
                    let seed = derive_seed(spec.base_seed, &[r as u64]);
                    generated(params, *validation_count, &config, seed)
                        .map_err(|e| Error::Record { index: i * spec.repeats + r, source: Box::new(e) })?
                }
            };
            splits.insert((key_i, r), s);
        }
    }

    let jobs: Vec<(usize, usize)> = (0..spec.grid.len()).flat_map(|i| (0..spec.repeats).map(move |r| (i, r))).collect();
    let runs: Vec<Result<SweepRun>> = jobs
        .par_iter()
        .map(|&(i, r)| {
            let value = spec.grid[i];
            let (layers, neurons, _) = spec.point(value)?;
            let (train_set, validation, data_seed) = &splits[&(if per_point { i } else { 0 }, r)];
            let width = train_set.config.decision_width();
            let mut dims = vec![4 * width];
            dims.extend(std::iter::repeat(neurons).take(layers));
            dims.push(2 * width);
            let init_seed = derive_seed(spec.base_seed, &[INIT_STREAM, i as u64, r as u64]);
            let shuffle_seed = derive_seed(spec.base_seed, &[SHUFFLE_STREAM, i as u64, r as u64]);
            let params = init_mlp(&dims, init_seed, spec.use_bias)?;
            let config = TrainingConfig { shuffle_seed, ..spec.training };
            let norm = normalization_for(train_set);
            let validation = (!validation.is_empty()).then_some(validation);
            let (_, history) = train(params, train_set, validation, &norm, &config)?;
            Ok(SweepRun {
                grid_index: i,
                value,
                repeat: r,
                data_seed: *data_seed,
                init_seed,
                shuffle_seed,
                layer_dims: dims,
                history,
            })
        })
        .collect();
    let runs = runs
        .into_iter()
        .enumerate()
        .map(|(index, r)| r.map_err(|e| Error::Record { index, source: Box::new(e) }))
        .collect::<Result<Vec<_>>>()?;

    let averaged = spec
        .grid
        .iter()
        .enumerate()
        .map(|(i, &value)| {
            let hs: Vec<TrainingHistory> =
                runs.iter().filter(|run| run.grid_index == i).map(|run| run.history.clone()).collect();
            Ok((value, TrainingHistory::average(&hs)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { runs, averaged })
}
