//! Labeled datasets: random problem instances paired with oracle answers.
//!
//! Files are JSON lines. The first line is a header carrying the format
//! name, the version, the [`SystemConfig`] and the [`GenerationInfo`]; each
//! following line is one [`Record`]. Numbers are written with enough digits
//! to round-trip exactly, and [`load_dataset`] re-checks every label
//! against the recorded configuration before returning.

mod sample;

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use sample::{generate_samples, grid_samples, SampleMatrix, SampleStream};

use crate::channel::OutageMode;
use crate::error::{Error, Result};
use crate::oracle::{self, Oracle, PowerAllocation, SystemConfig};

pub const DATASET_FORMAT: &str = "ofdmim-dataset";
pub const DATASET_VERSION: &str = "v1";

pub const DEFAULT_RANGE: (f64, f64) = (0.5, 5.0);
pub const DEFAULT_COUNT: usize = 6561;
pub const DEFAULT_VALIDATION_COUNT: usize = 1000;

/// Relative slack allowed between a recorded and a recomputed outage, so
/// files produced by other tools load.
pub const OUTAGE_TOLERANCE: f64 = 1e-9;

/// Draws per requested sample before feasible generation gives up.
pub const MAX_DRAWS_PER_SAMPLE: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    /// Independent uniform entries.
    #[default]
    Uniform,
    /// Full lattice of evenly spaced levels per entry.
    Grid { levels: usize },
    /// Samples supplied by the caller.
    Provided,
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sampler::Uniform => f.write_str("uniform"),
            Sampler::Grid { levels } => write!(f, "grid-{levels}"),
            Sampler::Provided => f.write_str("provided"),
        }
    }
}

/// How the samples of a dataset were produced and labeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationInfo {
    pub range_lo: f64,
    pub range_hi: f64,
    pub count: usize,
    pub seed: Option<u64>,
    pub delta: f64,
    pub outage_mode: OutageMode,
    pub sampler: Sampler,
    /// Draws discarded because they were infeasible at the power caps.
    pub rejections: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    /// Position in the originally generated sequence; survives splitting.
    pub id: usize,
    pub sample: SampleMatrix,
    pub label: PowerAllocation,
    pub total_power: f64,
    pub achieved_outage: f64,
    pub evaluations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: SystemConfig,
    pub gen: GenerationInfo,
    pub records: Vec<Record>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: String,
    config: SystemConfig,
    gen: GenerationInfo,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Checks every invariant a persisted dataset must satisfy, reporting
    /// the first violation as a message.
    pub fn check(&self) -> std::result::Result<(), String> {
        self.config.validate().map_err(|e| format!("config: {e}"))?;
        let g = &self.gen;
        if g.count != self.records.len() {
            return Err(format!("header count {} but {} records", g.count, self.records.len()));
        }
        if g.outage_mode != self.config.outage_mode {
            return Err("outage mode differs between config and generation info".into());
        }
        if !(g.range_lo > 0.0 && g.range_lo <= g.range_hi && g.range_hi.is_finite()) {
            return Err(format!("bad range [{}, {}]", g.range_lo, g.range_hi));
        }
        if !(g.delta > 0.0 && g.delta < 1.0) {
            return Err(format!("bad delta {}", g.delta));
        }
        let width = self.config.decision_width();
        let mut ids = HashSet::with_capacity(self.records.len());
        for r in &self.records {
            let fail = |msg: String| format!("record {}: {msg}", r.id);
            if !ids.insert(r.id) {
                return Err(fail("duplicate id".into()));
            }
            if r.sample.width() != width {
                return Err(fail(format!("sample has {} columns, expected {width}", r.sample.width())));
            }
            if !r.sample.within(g.range_lo, g.range_hi) {
                return Err(fail("sample entry outside the generation range".into()));
            }
            r.label.validate(&self.config).map_err(|e| fail(e.to_string()))?;
            if r.total_power.to_bits() != r.label.total_power().to_bits() {
                return Err(fail(format!("total_power {} does not match label", r.total_power)));
            }
            let outage = oracle::allocation_outage(&r.sample.stats(), &self.config, &r.label)
                .map_err(|e| fail(e.to_string()))?;
            if outage > self.config.psi_th {
                return Err(fail(format!("label outage {outage:e} exceeds {:e}", self.config.psi_th)));
            }
            if (outage - r.achieved_outage).abs() > OUTAGE_TOLERANCE * outage.max(f64::MIN_POSITIVE) {
                return Err(fail(format!("recorded outage {:e}, recomputed {outage:e}", r.achieved_outage)));
            }
        }
        Ok(())
    }
}

/// Uniform draws that are feasible at the power caps. Infeasible draws are
/// discarded and redrawn from the same stream; the second value is how many.
pub fn generate_feasible_samples(
    count: usize,
    range_lo: f64,
    range_hi: f64,
    config: &SystemConfig,
    seed: u64,
) -> Result<(Vec<SampleMatrix>, u64)> {
    config.validate()?;
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    let mut stream = SampleStream::new(range_lo, range_hi, config.decision_width(), seed)?;
    let mut out = Vec::with_capacity(count);
    let mut rejections = 0u64;
    let max_draws = count.saturating_mul(MAX_DRAWS_PER_SAMPLE) as u64;
    let mut last = None;
    while out.len() < count {
        if out.len() as u64 + rejections >= max_draws {
            let achieved = last.unwrap_or(1.0);
            return Err(Error::Infeasible { achieved, threshold: config.psi_th });
        }
        let s = stream.draw();
        let f = oracle::feasibility_check(&s.stats(), config)?;
        if f.feasible {
            out.push(s);
        } else {
            rejections += 1;
            last = Some(f.achieved_outage);
        }
    }
    Ok((out, rejections))
}

fn label_one(oracle: &Oracle, config: &SystemConfig, delta: f64, id: usize, sample: &SampleMatrix) -> Result<Record> {
    let r = oracle.solve(&sample.stats(), config, delta)?;
    Ok(Record {
        id,
        sample: sample.clone(),
        label: r.allocation,
        total_power: r.total_power,
        achieved_outage: r.achieved_outage,
        evaluations: r.evaluations,
    })
}

/// Solves every sample with the oracle, in parallel. Records keep the input
/// order and ids `0..len`; a failure is reported for the lowest failing
/// index. The generation range is the tightest range covering the samples;
/// callers that know the sampling law overwrite [`Dataset::gen`].
pub fn label_dataset(samples: &[SampleMatrix], config: &SystemConfig, delta: f64) -> Result<Dataset> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::invalid("no samples to label"));
    }
    let oracle = Oracle::default();
    let results: Vec<Result<Record>> =
        samples.par_iter().enumerate().map(|(i, s)| label_one(&oracle, config, delta, i, s)).collect();
    let mut records = Vec::with_capacity(samples.len());
    for (index, r) in results.into_iter().enumerate() {
        records.push(r.map_err(|e| Error::Record { index, source: Box::new(e) })?);
    }
    let (lo, hi) = samples
        .iter()
        .flat_map(|s| s.values().iter().copied())
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Ok(Dataset {
        config: config.clone(),
        gen: GenerationInfo {
            range_lo: lo,
            range_hi: hi,
            count: records.len(),
            seed: None,
            delta,
            outage_mode: config.outage_mode,
            sampler: Sampler::Provided,
            rejections: 0,
        },
        records,
    })
}

/// Parameters for [`build_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub count: usize,
    pub range_lo: f64,
    pub range_hi: f64,
    pub seed: u64,
    pub delta: f64,
    /// `Some(levels)` replaces random draws with the full lattice; `count`
    /// is then ignored.
    pub grid_levels: Option<usize>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            count: DEFAULT_COUNT,
            range_lo: DEFAULT_RANGE.0,
            range_hi: DEFAULT_RANGE.1,
            seed: 0,
            delta: oracle::DEFAULT_DELTA,
            grid_levels: None,
        }
    }
}

/// Sampling plus labeling, reproducible from `(params, config)`.
pub fn build_dataset(params: &GenerationParams, config: &SystemConfig) -> Result<Dataset> {
    config.validate()?;
    let (samples, rejections, sampler) = match params.grid_levels {
        None => {
            let (s, r) =
                generate_feasible_samples(params.count, params.range_lo, params.range_hi, config, params.seed)?;
            (s, r, Sampler::Uniform)
        }
        Some(levels) => {
            let all = grid_samples(levels, params.range_lo, params.range_hi, config.decision_width())?;
            let total = all.len();
            let mut kept = Vec::with_capacity(total);
            for s in all {
                if oracle::feasibility_check(&s.stats(), config)?.feasible {
                    kept.push(s);
                }
            }
            let rejections = (total - kept.len()) as u64;
            (kept, rejections, Sampler::Grid { levels })
        }
    };
    let mut ds = label_dataset(&samples, config, params.delta)?;
    ds.gen = GenerationInfo {
        range_lo: params.range_lo,
        range_hi: params.range_hi,
        count: ds.records.len(),
        seed: Some(params.seed),
        delta: params.delta,
        outage_mode: config.outage_mode,
        sampler,
        rejections,
    };
    Ok(ds)
}

/// Seeded disjoint split. Both halves keep the original record order.
pub fn split(dataset: &Dataset, validation_count: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = dataset.records.len();
    if validation_count >= n {
        return Err(Error::invalid(format!("validation count {validation_count} must be below the dataset size {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_validation = vec![false; n];
    for &i in &order[..validation_count] {
        in_validation[i] = true;
    }
    let part = |want: bool| {
        let records: Vec<Record> =
            dataset.records.iter().zip(&in_validation).filter(|(_, &v)| v == want).map(|(r, _)| r.clone()).collect();
        Dataset {
            config: dataset.config.clone(),
            gen: GenerationInfo { count: records.len(), ..dataset.gen.clone() },
            records,
        }
    };
    Ok((part(false), part(true)))
}

/// JSON-lines text of a dataset, exactly as [`save_dataset`] writes it.
pub fn dataset_to_jsonl(dataset: &Dataset) -> Result<String> {
    let header = Header {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION.into(),
        config: dataset.config.clone(),
        gen: dataset.gen.clone(),
    };
    let enc = |e: serde_json::Error| Error::Internal(format!("dataset encoding: {e}"));
    let mut out = serde_json::to_string(&header).map_err(enc)?;
    out.push('\n');
    for r in &dataset.records {
        out.push_str(&serde_json::to_string(r).map_err(enc)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn dataset_from_jsonl(text: &str, path: &Path) -> Result<Dataset> {
    let schema = |line: usize, message: String| Error::Schema { path: path.to_path_buf(), line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| schema(1, "empty file".into()))?;

    let probe: serde_json::Value = serde_json::from_str(first).map_err(|e| schema(1, e.to_string()))?;
    if probe.get("format").and_then(|v| v.as_str()) != Some(DATASET_FORMAT) {
        return Err(schema(1, format!("not an {DATASET_FORMAT} file")));
    }
    let version = probe.get("version").and_then(|v| v.as_str()).unwrap_or("");
    if version != DATASET_VERSION {
        return Err(Error::SchemaVersion {
            path: path.to_path_buf(),
            found: version.to_string(),
            expected: DATASET_VERSION.to_string(),
        });
    }
    let header: Header = serde_json::from_value(probe).map_err(|e| schema(1, e.to_string()))?;

    let mut records = Vec::with_capacity(header.gen.count);
    for (line, text) in lines {
        if text.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str::<Record>(text).map_err(|e| schema(line, e.to_string()))?);
    }
    let dataset = Dataset { config: header.config, gen: header.gen, records };
    dataset.check().map_err(|message| Error::InvariantViolation { path: path.to_path_buf(), message })?;
    Ok(dataset)
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, dataset_to_jsonl(dataset)?.as_bytes())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    dataset_from_jsonl(&text, path)
}

impl FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Sampler::Uniform),
            "provided" => Ok(Sampler::Provided),
            _ => s
                .strip_prefix("grid-")
                .and_then(|l| l.parse().ok())
                .map(|levels| Sampler::Grid { levels })
                .ok_or_else(|| Error::invalid(format!("unknown sampler {s:?}"))),
        }
    }
}
