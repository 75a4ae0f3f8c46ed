//! Mini-batch training of the allocation network, the evaluation metrics,
//! and parameter sweeps.

mod compare;
mod sweep;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use compare::{
    compare_total_power, repair_scale_up, ComparisonReport, ComparisonRow, ComparisonSummary, RepairMode,
};
pub use sweep::{derive_seed, sweep, SweepData, SweepKind, SweepResult, SweepRun, SweepSpec};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::neural::{
    adam_update, decode_output, encode_input, encode_label, AdamConfig, AdamState, MlpParams, Normalization, Workspace,
};
use crate::oracle::PowerAllocation;

pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_SNAPSHOT_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub shuffle_seed: u64,
    /// Epochs between history snapshots; the last epoch is always recorded.
    pub snapshot_every: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 10_000,
            batch_size: DEFAULT_BATCH_SIZE,
            adam: AdamConfig::default(),
            shuffle_seed: 0,
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self, dataset_size: usize) -> Result<()> {
        self.adam.validate()?;
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.snapshot_every == 0 {
            return Err(Error::invalid("snapshot interval must be at least 1"));
        }
        if self.batch_size == 0 || self.batch_size > dataset_size {
            return Err(Error::invalid(format!("batch size {} must lie in [1, {dataset_size}]", self.batch_size)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub epoch: usize,
    /// Mean per-sample squared error over the epoch's batches.
    pub loss: f64,
    /// Relative error on the validation set, if one was given.
    pub rel_error: Option<f64>,
    /// Seconds since training started. Not part of the CSV output.
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub snapshots: Vec<Snapshot>,
}

impl TrainingHistory {
    pub const CSV_HEADER: &'static str = "epoch,loss,rel_error";

    /// `epoch,loss,rel_error` rows; a missing relative error is left empty.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for s in &self.snapshots {
            let rel = s.rel_error.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", s.epoch, s.loss, rel));
        }
        out
    }

    pub fn losses(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.loss).collect()
    }

    pub fn rel_errors(&self) -> Vec<f64> {
        self.snapshots.iter().filter_map(|s| s.rel_error).collect()
    }

    /// Snapshot-wise mean of histories with identical epochs.
    pub fn average(histories: &[TrainingHistory]) -> Result<TrainingHistory> {
        let first = histories.first().ok_or_else(|| Error::invalid("nothing to average"))?;
        let k = histories.len() as f64;
        let mut snapshots = first.snapshots.clone();
        for h in &histories[1..] {
            if h.snapshots.len() != snapshots.len()
                || h.snapshots.iter().zip(&snapshots).any(|(a, b)| a.epoch != b.epoch)
            {
                return Err(Error::invalid("histories have different snapshot epochs"));
            }
            for (acc, s) in snapshots.iter_mut().zip(&h.snapshots) {
                acc.loss += s.loss;
                acc.rel_error = acc.rel_error.zip(s.rel_error).map(|(a, b)| a + b);
                acc.elapsed_secs += s.elapsed_secs;
            }
        }
        for s in &mut snapshots {
            s.loss /= k;
            s.rel_error = s.rel_error.map(|v| v / k);
            s.elapsed_secs /= k;
        }
        Ok(TrainingHistory { snapshots })
    }
}

/// Centered moving average with the window truncated at both ends.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Network-ready inputs and targets of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSet {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl EncodedSet {
    pub fn new(dataset: &Dataset, norm: &Normalization) -> Result<Self> {
        norm.validate()?;
        let mut inputs = Vec::with_capacity(dataset.len());
        let mut targets = Vec::with_capacity(dataset.len());
        for r in &dataset.records {
            inputs.push(encode_input(&r.sample, norm.range_hi)?);
            targets.push(encode_label(&r.label, norm.pt_max, norm.pr_max));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Scaling implied by a dataset's generation range and power caps.
pub fn normalization_for(dataset: &Dataset) -> Normalization {
    Normalization { range_hi: dataset.gen.range_hi, pt_max: dataset.config.pt_max, pr_max: dataset.config.pr_max }
}

fn check_shapes(params: &MlpParams, set: &EncodedSet) -> Result<()> {
    let (i, o) = (set.inputs.first().map_or(0, Vec::len), set.targets.first().map_or(0, Vec::len));
    if i != params.input_dim() {
        return Err(Error::ShapeMismatch { expected: params.input_dim(), actual: i, context: "network input" });
    }
    if o != params.output_dim() {
        return Err(Error::ShapeMismatch { expected: params.output_dim(), actual: o, context: "network output" });
    }
    Ok(())
}

/// Trains `params` on `train` with Adam.
///
/// Each epoch shuffles the sample order with a generator seeded once from
/// `config.shuffle_seed`, cuts it into batches of `batch_size` (the last one
/// may be shorter) and takes one Adam step per batch on the batch-mean
/// squared error. The result is a pure function of the inputs.
pub fn train(
    mut params: MlpParams,
    train: &Dataset,
    validation: Option<&Dataset>,
    norm: &Normalization,
    config: &TrainingConfig,
) -> Result<(MlpParams, TrainingHistory)> {
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    config.validate(train.len())?;
    let set = EncodedSet::new(train, norm)?;
    check_shapes(&params, &set)?;
    if let Some(v) = validation {
        check_shapes(&params, &EncodedSet::new(v, norm)?)?;
    }

    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let mut adam = AdamState::for_params(config.adam, &params)?;
    let mut ws = Workspace::new(&params);
    let mut grad = vec![0.0; params.param_count()];
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut history = TrainingHistory::default();
    let mut last_finite = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sq = 0.0;
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / chunk.len() as f64;
            let mut sq = 0.0;
            for &i in chunk {
                ws.forward(&params, &set.inputs[i], None);
                sq += ws.backward(&params, &set.targets[i], scale, &mut grad);
            }
            let loss = sq * scale;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch, last_finite });
            }
            last_finite = Some(loss);
            epoch_sq += sq;
            adam_update(&mut adam, params.as_flat_mut(), &grad)?;
        }
        if epoch % config.snapshot_every == 0 || epoch == config.epochs {
            let rel_error = match validation {
                Some(v) => Some(relative_error(&params, v, norm)?.mean),
                None => None,
            };
            history.snapshots.push(Snapshot {
                epoch,
                loss: epoch_sq / set.len() as f64,
                rel_error,
                elapsed_secs: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok((params, history))
}

/// Network prediction for every record, decoded to powers.
pub fn predict(params: &MlpParams, dataset: &Dataset, norm: &Normalization) -> Result<Vec<PowerAllocation>> {
    let set = EncodedSet::new(dataset, norm)?;
    check_shapes(params, &set)?;
    let mut ws = Workspace::new(params);
    set.inputs
        .iter()
        .map(|x| {
            ws.forward(params, x, None);
            decode_output(ws.output(), norm.pt_max, norm.pr_max)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeError {
    pub mean: f64,
    /// Records that entered the mean.
    pub used: usize,
    /// Records skipped because their label has a zero entry.
    pub excluded_zero_labels: usize,
}

/// Mean over records of the mean entrywise `|label - prediction| / label`,
/// in power units. Records whose label has an exact zero are skipped and
/// counted; if nothing is left the result is an error.
pub fn relative_error_of(predictions: &[PowerAllocation], labels: &[PowerAllocation]) -> Result<RelativeError> {
    if predictions.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: labels.len(),
            actual: predictions.len(),
            context: "predictions per label",
        });
    }
    let mut total = 0.0;
    let mut used = 0;
    let mut excluded = 0;
    for (p, l) in predictions.iter().zip(labels) {
        let truth = l.pt.iter().chain(&l.pr);
        let guess = p.pt.iter().chain(&p.pr);
        if p.pt.len() != l.pt.len() || p.pr.len() != l.pr.len() {
            return Err(Error::ShapeMismatch {
                expected: l.pt.len() + l.pr.len(),
                actual: p.pt.len() + p.pr.len(),
                context: "allocation entries",
            });
        }
        if truth.clone().any(|&u| u == 0.0) {
            excluded += 1;
            continue;
        }
        let k = (l.pt.len() + l.pr.len()) as f64;
        total += truth.zip(guess).map(|(u, o)| ((u - o) / u).abs()).sum::<f64>() / k;
        used += 1;
    }
    if used == 0 {
        return Err(Error::invalid(format!("relative error undefined: all {excluded} labels contain a zero entry")));
    }
    Ok(RelativeError { mean: total / used as f64, used, excluded_zero_labels: excluded })
}

pub fn relative_error(params: &MlpParams, validation: &Dataset, norm: &Normalization) -> Result<RelativeError> {
    let predictions = predict(params, validation, norm)?;
    let labels: Vec<PowerAllocation> = validation.records.iter().map(|r| r.label.clone()).collect();
    relative_error_of(&predictions, &labels)
}
