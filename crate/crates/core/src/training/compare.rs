use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::predict;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::neural::{MlpParams, Normalization};
use crate::oracle::{self, PowerAllocation, SystemConfig};

/// What to do with network outputs that violate the outage cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepairMode {
    /// Report them as they are.
    #[default]
    None,
    /// Multiply both power vectors by the smallest common factor that meets
    /// the cap, clipping at the power caps.
    ScaleUp,
}

impl fmt::Display for RepairMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RepairMode::None => "none",
            RepairMode::ScaleUp => "scale-up",
        })
    }
}

impl FromStr for RepairMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(RepairMode::None),
            "scale-up" => Ok(RepairMode::ScaleUp),
            _ => Err(Error::invalid(format!("unknown repair mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub sample_id: usize,
    pub ann_total: f64,
    pub oracle_total: f64,
    /// `(ann_total - oracle_total) / oracle_total`.
    pub gap: f64,
    pub ann_outage: f64,
    pub violated: bool,
    /// Common factor applied by the scale-up repair, if any.
    pub repair_factor: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub count: usize,
    pub mean_gap: f64,
    pub mean_abs_gap: f64,
    pub violation_rate: f64,
    /// Fraction of samples with `|gap| <= 0.25`.
    pub within_25_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub repair: RepairMode,
    pub rows: Vec<ComparisonRow>,
    pub summary: ComparisonSummary,
}

impl ComparisonReport {
    pub const CSV_HEADER: &'static str = "sample_id,ann_total,oracle_total,gap,violated";

    pub fn from_rows(repair: RepairMode, rows: Vec<ComparisonRow>) -> Self {
        let summary = summarize(&rows);
        Self { repair, rows, summary }
    }

    /// Fraction of rows with `|gap| <= tolerance`.
    pub fn fraction_within(&self, tolerance: f64) -> f64 {
        fraction(&self.rows, |r| r.gap.abs() <= tolerance)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.sample_id, r.ann_total, r.oracle_total, r.gap, r.violated as u8
            ));
        }
        out
    }
}

fn fraction(rows: &[ComparisonRow], pred: impl Fn(&ComparisonRow) -> bool) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|r| pred(r)).count() as f64 / rows.len() as f64
}

fn summarize(rows: &[ComparisonRow]) -> ComparisonSummary {
    let n = rows.len().max(1) as f64;
    ComparisonSummary {
        count: rows.len(),
        mean_gap: rows.iter().map(|r| r.gap).sum::<f64>() / n,
        mean_abs_gap: rows.iter().map(|r| r.gap.abs()).sum::<f64>() / n,
        violation_rate: fraction(rows, |r| r.violated),
        within_25_percent: fraction(rows, |r| r.gap.abs() <= 0.25),
    }
}

fn relative_gap(ann: f64, oracle: f64) -> f64 {
    if oracle > 0.0 {
        (ann - oracle) / oracle
    } else if ann == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Smallest common factor `c >= 1` such that `min(c · allocation, caps)`
/// meets the outage cap, found by bisection. `None` when even the largest
/// useful factor does not (for example, when an entry is zero).
pub fn repair_scale_up(
    stats: &[crate::channel::SubcarrierStats],
    config: &SystemConfig,
    allocation: &PowerAllocation,
) -> Result<Option<(f64, PowerAllocation)>> {
    let scaled = |c: f64| PowerAllocation {
        pt: allocation.pt.iter().map(|p| (p * c).min(config.pt_max)).collect(),
        pr: allocation.pr.iter().map(|p| (p * c).min(config.pr_max)).collect(),
    };
    let ok = |c: f64| -> Result<bool> { Ok(oracle::allocation_outage(stats, config, &scaled(c))? <= config.psi_th) };
    if ok(1.0)? {
        return Ok(Some((1.0, allocation.clone())));
    }
    let hi_needed = allocation
        .pt
        .iter()
        .map(|&p| config.pt_max / p)
        .chain(allocation.pr.iter().map(|&p| config.pr_max / p))
        .fold(1.0f64, f64::max);
    if !hi_needed.is_finite() || !ok(hi_needed)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (1.0, hi_needed);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some((hi, scaled(hi))))
}

/// Network allocation versus a fresh oracle solve at resolution `delta`,
/// for every record of `samples`. Labels stored in `samples` are ignored.
pub fn compare_total_power(
    params: &MlpParams,
    norm: &Normalization,
    samples: &Dataset,
    config: &SystemConfig,
    delta: f64,
    repair: RepairMode,
) -> Result<ComparisonReport> {
    config.validate()?;
    let predictions = predict(params, samples, norm)?;
    let rows: Vec<Result<ComparisonRow>> = samples
        .records
        .par_iter()
        .zip(predictions.into_par_iter())
        .map(|(record, ann)| {
            let stats = record.sample.stats();
            let best = oracle::solve(&stats, config, delta)?;
            let (ann, repair_factor) = match repair {
                RepairMode::None => (ann, None),
                RepairMode::ScaleUp => match repair_scale_up(&stats, config, &ann)? {
                    Some((c, fixed)) => (fixed, Some(c)),
                    None => (ann, None),
                },
            };
            let ann_outage = oracle::allocation_outage(&stats, config, &ann)?;
            let ann_total = ann.total_power();
            Ok(ComparisonRow {
                sample_id: record.id,
                ann_total,
                oracle_total: best.total_power,
                gap: relative_gap(ann_total, best.total_power),
                ann_outage,
                violated: ann_outage > config.psi_th,
                repair_factor,
            })
        })
        .collect();
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(index, r)| r.map_err(|e| Error::Record { index, source: Box::new(e) }))
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonReport::from_rows(repair, rows))
}
