//! Scaling between physical quantities and the network's unit interval.

use serde::{Deserialize, Serialize};

use crate::dataset::SampleMatrix;
use crate::error::{Error, Result};
use crate::oracle::PowerAllocation;

/// Constants that map samples and labels into `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// Upper end of the sample generation range.
    pub range_hi: f64,
    pub pt_max: f64,
    pub pr_max: f64,
}

impl Normalization {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("range_hi", self.range_hi), ("pt_max", self.pt_max), ("pr_max", self.pr_max)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Row-major flattening of the sample matrix divided by `range_hi`.
pub fn encode_input(sample: &SampleMatrix, range_hi: f64) -> Result<Vec<f64>> {
    if !(range_hi.is_finite() && range_hi > 0.0) {
        return Err(Error::invalid(format!("range_hi must be positive, got {range_hi}")));
    }
    sample
        .values()
        .iter()
        .map(|&v| {
            if v > 0.0 && v <= range_hi {
                Ok(v / range_hi)
            } else {
                Err(Error::invalid(format!("sample entry {v} outside (0, {range_hi}]")))
            }
        })
        .collect()
}

/// Label vector `[pt / pt_max.., pr / pr_max..]`.
pub fn encode_label(allocation: &PowerAllocation, pt_max: f64, pr_max: f64) -> Vec<f64> {
    allocation.pt.iter().map(|p| p / pt_max).chain(allocation.pr.iter().map(|p| p / pr_max)).collect()
}

/// First half of `raw` scales to source powers, second half to relay powers.
pub fn decode_output(raw: &[f64], pt_max: f64, pr_max: f64) -> Result<PowerAllocation> {
    if raw.len() % 2 != 0 {
        return Err(Error::ShapeMismatch {
            expected: raw.len() + 1,
            actual: raw.len(),
            context: "network output (must be even)",
        });
    }
    let t = raw.len() / 2;
    Ok(PowerAllocation {
        pt: raw[..t].iter().map(|r| r.clamp(0.0, 1.0) * pt_max).collect(),
        pr: raw[t..].iter().map(|r| r.clamp(0.0, 1.0) * pr_max).collect(),
    })
}
