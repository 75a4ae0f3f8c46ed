use std::path::{Path, PathBuf};

use clap::Args;
use ofdmim_core::channel::SubcarrierStats;
use ofdmim_core::dataset::{self, Dataset, GenerationInfo, GenerationParams, Sampler};
use ofdmim_core::io::write_atomic;
use ofdmim_core::neural::{init_mlp, Model};
use ofdmim_core::oracle::{self, OracleResult};
use ofdmim_core::training::{self, RepairMode, SweepData, SweepKind, SweepSpec};
use ofdmim_core::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::manifest::{manifest_path, to_value, ManifestBuilder};
use crate::settings::{
    pick_profile, read_config_file, require_path, resolve, Profile, SystemFlags, SystemSettings, TrainFlags,
    TrainSettings,
};

/// `data.jsonl` → `data.<tag>.jsonl`.
fn sibling(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

fn load_file(path: &Option<PathBuf>) -> Result<Option<serde_json::Map<String, serde_json::Value>>> {
    path.as_deref().map(read_config_file).transpose()
}

fn range_pair(range: [f64; 2]) -> (f64, f64) {
    (range[0], range[1])
}

// gen-data

#[derive(Debug, Args, Serialize)]
pub struct GenDataArgs {
    /// JSON file with any of these settings (or a manifest to replay).
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip)]
    profile: Option<Profile>,
    /// Samples to draw (ignored with --grid).
    #[arg(long)]
    count: Option<usize>,
    /// Uniform sampling range of every statistic.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    range: Option<Vec<f64>>,
    /// Use the full lattice with this many levels per entry instead of random draws.
    #[arg(long)]
    grid: Option<usize>,
    /// Relative resolution of the labeling search.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write a split with this many validation records.
    #[arg(long = "validation-count")]
    validation_count: Option<usize>,
    #[arg(long = "split-seed")]
    split_seed: Option<u64>,
    /// Dataset file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    system: SystemFlags,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GenDataSettings {
    profile: Profile,
    count: usize,
    range: [f64; 2],
    grid: Option<usize>,
    delta: f64,
    seed: u64,
    validation_count: usize,
    split_seed: u64,
    out: Option<PathBuf>,
    #[serde(flatten)]
    system: SystemSettings,
}

impl GenDataSettings {
    fn defaults(profile: Profile) -> Self {
        let (count, validation_count) = match profile {
            Profile::Desk => (1200, 200),
            Profile::Paper => {
                (dataset::DEFAULT_COUNT + dataset::DEFAULT_VALIDATION_COUNT, dataset::DEFAULT_VALIDATION_COUNT)
            }
        };
        Self {
            profile,
            count,
            range: [dataset::DEFAULT_RANGE.0, dataset::DEFAULT_RANGE.1],
            grid: None,
            delta: oracle::DEFAULT_DELTA,
            seed: 0,
            validation_count,
            split_seed: 0,
            out: None,
            system: SystemSettings::default(),
        }
    }
}

pub fn gen_data(args: GenDataArgs) -> Result<()> {
    let file = load_file(&args.config)?;
    let profile = pick_profile(args.profile, &file)?;
    let s: GenDataSettings = resolve(&GenDataSettings::defaults(profile), file, &args)?;
    let out = require_path(&s.out, "--out")?;
    let config = s.system.config()?;
    let manifest = ManifestBuilder::new("gen-data", &s)?;

    let (lo, hi) = range_pair(s.range);
    let params = GenerationParams {
        count: s.count,
        range_lo: lo,
        range_hi: hi,
        seed: s.seed,
        delta: s.delta,
        grid_levels: s.grid,
    };
    if s.grid.is_none() && s.validation_count >= s.count.max(1) {
        return Err(Error::InvalidArguments(format!(
            "--validation-count {} must be below --count {}",
            s.validation_count, s.count
        )));
    }
    let ds = dataset::build_dataset(&params, &config)?;
    eprintln!("labeled {} records, {} infeasible draws rejected", ds.len(), ds.gen.rejections);
    dataset::save_dataset(&ds, &out)?;
    let mut artifacts = vec![out.clone()];
    if s.validation_count > 0 {
        let (train, validation) = dataset::split(&ds, s.validation_count, s.split_seed)?;
        for (tag, part) in [("train", &train), ("validation", &validation)] {
            let p = sibling(&out, tag);
            dataset::save_dataset(part, &p)?;
            artifacts.push(p);
        }
        eprintln!("split into {} training and {} validation records", train.len(), validation.len());
    }
    let evaluations: u64 = ds.records.iter().map(|r| r.evaluations).sum();
    manifest.write(
        &manifest_path(&out),
        json!({ "seed": s.seed, "split_seed": s.split_seed }),
        artifacts,
        json!({ "records": ds.len(), "rejections": ds.gen.rejections, "evaluations": evaluations }),
    )
}

// train

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip)]
    profile: Option<Profile>,
    /// Training dataset.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Validation dataset for the relative error curve.
    #[arg(long)]
    validation: Option<PathBuf>,
    #[arg(long = "init-seed")]
    init_seed: Option<u64>,
    #[arg(long = "shuffle-seed")]
    shuffle_seed: Option<u64>,
    /// Model file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// History CSV (default: <out>.history.csv).
    #[arg(long)]
    history: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    train: TrainFlags,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrainCmdSettings {
    profile: Profile,
    data: Option<PathBuf>,
    validation: Option<PathBuf>,
    init_seed: u64,
    shuffle_seed: u64,
    out: Option<PathBuf>,
    history: Option<PathBuf>,
    #[serde(flatten)]
    train: TrainSettings,
}

pub fn train(args: TrainArgs) -> Result<()> {
    let file = load_file(&args.config)?;
    let profile = pick_profile(args.profile, &file)?;
    let defaults = TrainCmdSettings {
        profile,
        data: None,
        validation: None,
        init_seed: 0,
        shuffle_seed: 0,
        out: None,
        history: None,
        train: TrainSettings::for_profile(profile),
    };
    let s: TrainCmdSettings = resolve(&defaults, file, &args)?;
    let data_path = require_path(&s.data, "--data")?;
    let out = require_path(&s.out, "--out")?;
    let history_path = s.history.clone().unwrap_or_else(|| sibling(&out, "history").with_extension("csv"));
    let manifest = ManifestBuilder::new("train", &s)?;

    let data = dataset::load_dataset(&data_path)?;
    let validation = s.validation.as_deref().map(dataset::load_dataset).transpose()?;
    let dims = s.train.layer_dims(data.config.decision_width());
    let params = init_mlp(&dims, s.init_seed, s.train.use_bias)?;
    let norm = training::normalization_for(&data);
    eprintln!("training {dims:?} on {} records for {} epochs", data.len(), s.train.epochs);
    let (params, history) =
        training::train(params, &data, validation.as_ref(), &norm, &s.train.training_config(s.shuffle_seed))?;

    Model { params, normalization: norm }.save(&out)?;
    write_atomic(&history_path, history.to_csv().as_bytes())?;
    let last = history.snapshots.last().copied();
    if let Some(snap) = last {
        match snap.rel_error {
            Some(e) => println!("epoch {}: loss {:e}, relative error {e:.4}", snap.epoch, snap.loss),
            None => println!("epoch {}: loss {:e}", snap.epoch, snap.loss),
        }
    }
    manifest.write(
        &manifest_path(&out),
        json!({ "init_seed": s.init_seed, "shuffle_seed": s.shuffle_seed }),
        vec![out.clone(), history_path],
        json!({
            "final": last,
            "elapsed_secs": history.snapshots.iter().map(|s| s.elapsed_secs).collect::<Vec<_>>(),
        }),
    )
}

// solve

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Source-hop mean gains, one per decision subcarrier.
    #[arg(long, value_delimiter = ',')]
    mu1: Option<Vec<f64>>,
    /// Relay-hop mean gains.
    #[arg(long, value_delimiter = ',')]
    mu2: Option<Vec<f64>>,
    /// Relay noise powers.
    #[arg(long, value_delimiter = ',')]
    eta1: Option<Vec<f64>>,
    /// Destination noise powers.
    #[arg(long, value_delimiter = ',')]
    eta2: Option<Vec<f64>>,
    #[arg(long)]
    delta: Option<f64>,
    /// Enumerate a flat lattice with this many points per axis instead.
    #[arg(long = "brute-force")]
    brute_force: Option<usize>,
    /// Also write the result (and a manifest) to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    system: SystemFlags,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SolveSettings {
    mu1: Vec<f64>,
    mu2: Vec<f64>,
    eta1: Vec<f64>,
    eta2: Vec<f64>,
    delta: f64,
    brute_force: Option<usize>,
    out: Option<PathBuf>,
    #[serde(flatten)]
    system: SystemSettings,
}

pub fn solve(args: SolveArgs) -> Result<()> {
    let file = load_file(&args.config)?;
    let defaults = SolveSettings {
        mu1: vec![],
        mu2: vec![],
        eta1: vec![],
        eta2: vec![],
        delta: oracle::DEFAULT_DELTA,
        brute_force: None,
        out: None,
        system: SystemSettings::default(),
    };
    let s: SolveSettings = resolve(&defaults, file, &args)?;
    let config = s.system.config()?;
    let width = config.decision_width();
    for (name, v) in [("--mu1", &s.mu1), ("--mu2", &s.mu2), ("--eta1", &s.eta1), ("--eta2", &s.eta2)] {
        if v.len() != width {
            return Err(Error::InvalidArguments(format!("{name} needs {width} values, got {}", v.len())));
        }
    }
    let stats = (0..width)
        .map(|i| SubcarrierStats::new(s.mu1[i], s.mu2[i], s.eta1[i], s.eta2[i]))
        .collect::<Result<Vec<_>>>()?;
    let manifest = ManifestBuilder::new("solve", &s)?;
    let result: OracleResult = match s.brute_force {
        Some(g) => oracle::brute_force_reference(&stats, &config, g)?,
        None => oracle::solve(&stats, &config, s.delta)?,
    };
    let mut text = serde_json::to_string_pretty(&result).map_err(|e| Error::Internal(e.to_string()))?;
    text.push('\n');
    print!("{text}");
    if let Some(out) = &s.out {
        write_atomic(out, text.as_bytes())?;
        manifest.write(&manifest_path(out), json!({}), vec![out.clone()], to_value(&result)?)?;
    }
    Ok(())
}

// eval

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Trained model file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Held-out dataset; its system configuration is used.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Oracle resolution (default: the dataset's).
    #[arg(long)]
    delta: Option<f64>,
    /// none or scale-up.
    #[arg(long)]
    repair: Option<RepairMode>,
    /// Use only the first N records.
    #[arg(long)]
    limit: Option<usize>,
    /// Comparison CSV to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EvalSettings {
    model: Option<PathBuf>,
    data: Option<PathBuf>,
    delta: Option<f64>,
    repair: RepairMode,
    limit: Option<usize>,
    out: Option<PathBuf>,
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let file = load_file(&args.config)?;
    let defaults =
        EvalSettings { model: None, data: None, delta: None, repair: RepairMode::None, limit: None, out: None };
    let s: EvalSettings = resolve(&defaults, file, &args)?;
    let model_path = require_path(&s.model, "--model")?;
    let data_path = require_path(&s.data, "--data")?;
    let out = require_path(&s.out, "--out")?;
    let manifest = ManifestBuilder::new("eval", &s)?;

    let model = Model::load(&model_path)?;
    let mut data = dataset::load_dataset(&data_path)?;
    if let Some(limit) = s.limit {
        data.records.truncate(limit);
        data.gen.count = data.records.len();
    }
    if data.is_empty() {
        return Err(Error::InvalidArguments("no records to evaluate".into()));
    }
    let delta = s.delta.unwrap_or(data.gen.delta);
    let report =
        training::compare_total_power(&model.params, &model.normalization, &data, &data.config, delta, s.repair)?;
    write_atomic(&out, report.to_csv().as_bytes())?;
    let rel = training::relative_error(&model.params, &data, &model.normalization).ok();
    let m = &report.summary;
    println!(
        "samples {}: mean gap {:.4}, mean |gap| {:.4}, within 25% {:.3}, violation rate {:.3}{}",
        m.count,
        m.mean_gap,
        m.mean_abs_gap,
        m.within_25_percent,
        m.violation_rate,
        rel.map(|r| format!(", relative error {:.4}", r.mean)).unwrap_or_default()
    );
    manifest.write(
        &manifest_path(&out),
        json!({}),
        vec![out.clone()],
        json!({ "summary": report.summary, "relative_error": rel, "delta": delta }),
    )
}

// sweep

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip)]
    profile: Option<Profile>,
    /// neurons, layers or outage-threshold.
    #[arg(long)]
    kind: Option<SweepKind>,
    /// Grid values, comma separated.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Independent runs per grid point.
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed training dataset (otherwise data is generated per repeat).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    validation: Option<PathBuf>,
    /// Generated samples per repeat, validation included.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    range: Option<Vec<f64>>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "validation-count")]
    validation_count: Option<usize>,
    /// Directory for the per-run CSVs.
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    system: SystemFlags,
    #[command(flatten)]
    #[serde(flatten)]
    train: TrainFlags,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SweepSettings {
    profile: Profile,
    kind: SweepKind,
    grid: Vec<f64>,
    repeats: usize,
    seed: u64,
    data: Option<PathBuf>,
    validation: Option<PathBuf>,
    count: usize,
    range: [f64; 2],
    delta: f64,
    validation_count: usize,
    out_dir: Option<PathBuf>,
    #[serde(flatten)]
    system: SystemSettings,
    #[serde(flatten)]
    train: TrainSettings,
}

fn empty_like(d: &Dataset) -> Dataset {
    Dataset {
        config: d.config.clone(),
        gen: GenerationInfo { count: 0, sampler: Sampler::Provided, ..d.gen.clone() },
        records: vec![],
    }
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let file = load_file(&args.config)?;
    let profile = pick_profile(args.profile, &file)?;
    let gen = GenDataSettings::defaults(profile);
    let defaults = SweepSettings {
        profile,
        kind: SweepKind::Neurons,
        grid: vec![32.0, 64.0, 128.0],
        repeats: 10,
        seed: 0,
        data: None,
        validation: None,
        count: gen.count,
        range: gen.range,
        delta: gen.delta,
        validation_count: gen.validation_count,
        out_dir: None,
        system: SystemSettings::default(),
        train: TrainSettings::for_profile(profile),
    };
    let s: SweepSettings = resolve(&defaults, file, &args)?;
    let out_dir = require_path(&s.out_dir, "--out-dir")?;
    let manifest = ManifestBuilder::new("sweep", &s)?;

    let data = match &s.data {
        Some(path) => {
            let train = dataset::load_dataset(path)?;
            let validation = match &s.validation {
                Some(v) => dataset::load_dataset(v)?,
                None => empty_like(&train),
            };
            SweepData::Fixed { train, validation }
        }
        None => {
            let (lo, hi) = range_pair(s.range);
            SweepData::Generate {
                params: GenerationParams {
                    count: s.count,
                    range_lo: lo,
                    range_hi: hi,
                    seed: 0,
                    delta: s.delta,
                    grid_levels: None,
                },
                validation_count: s.validation_count,
            }
        }
    };
    let config = match &data {
        SweepData::Fixed { train, .. } => train.config.clone(),
        SweepData::Generate { .. } => s.system.config()?,
    };
    let spec = SweepSpec {
        kind: s.kind,
        grid: s.grid.clone(),
        repeats: s.repeats,
        base_seed: s.seed,
        hidden_layers: s.train.hidden_layers,
        neurons: s.train.neurons,
        use_bias: s.train.use_bias,
        training: s.train.training_config(0),
        config,
    };
    eprintln!("sweeping {} over {:?} with {} repeats", s.kind, s.grid, s.repeats);
    let result = training::sweep(&spec, &data)?;

    std::fs::create_dir_all(&out_dir).map_err(|source| Error::Io { path: out_dir.clone(), source })?;
    let mut artifacts = Vec::new();
    let mut index =
        String::from("run_id,grid_index,value,repeat,data_seed,init_seed,shuffle_seed,final_loss,final_rel_error\n");
    for run in &result.runs {
        let p = out_dir.join(format!("run-{}.csv", run.id()));
        write_atomic(&p, run.history.to_csv().as_bytes())?;
        artifacts.push(p);
        let last = run.history.snapshots.last();
        index.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            run.id(),
            run.grid_index,
            run.value,
            run.repeat,
            run.data_seed.map(|v| v.to_string()).unwrap_or_default(),
            run.init_seed,
            run.shuffle_seed,
            last.map(|s| s.loss.to_string()).unwrap_or_default(),
            last.and_then(|s| s.rel_error).map(|v| v.to_string()).unwrap_or_default(),
        ));
    }
    for (i, (_, h)) in result.averaged.iter().enumerate() {
        let p = out_dir.join(format!("mean-g{i}.csv"));
        write_atomic(&p, h.to_csv().as_bytes())?;
        artifacts.push(p);
    }
    let runs_path = out_dir.join("runs.csv");
    write_atomic(&runs_path, index.as_bytes())?;
    artifacts.push(runs_path);
    println!("{} runs written to {}", result.runs.len(), out_dir.display());
    manifest.write(
        &out_dir.join("manifest.json"),
        json!({ "base_seed": s.seed }),
        artifacts,
        json!({ "runs": result.runs.len() }),
    )
}
