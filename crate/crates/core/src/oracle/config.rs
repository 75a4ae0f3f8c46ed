use serde::{Deserialize, Serialize};

use crate::channel::{OutageMode, SubcarrierPower};
use crate::error::{Error, Result};
use crate::im_mapping::{self, SapSet};

/// Default per-subcarrier power caps (linear units).
pub const DEFAULT_POWER_CAP: f64 = 5000.0;

/// System parameters of the power-minimization problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Subcarriers per block.
    pub n: usize,
    /// Active subcarriers per block.
    pub t: usize,
    /// PSK order.
    pub m: usize,
    /// SNR outage threshold, linear.
    pub s: f64,
    /// Cap on the block outage probability.
    pub psi_th: f64,
    pub pt_max: f64,
    pub pr_max: f64,
    #[serde(default)]
    pub outage_mode: OutageMode,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n: 4,
            t: 2,
            m: 4,
            s: 1.0,
            psi_th: 1e-2,
            pt_max: DEFAULT_POWER_CAP,
            pr_max: DEFAULT_POWER_CAP,
            outage_mode: OutageMode::SingleSap,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        im_mapping::bitstream_length(self.n, self.t, self.m)?;
        if !(self.s.is_finite() && self.s > 0.0) {
            return Err(Error::invalid(format!("s must be positive, got {}", self.s)));
        }
        if !(self.psi_th > 0.0 && self.psi_th <= 1.0) {
            return Err(Error::invalid(format!("psi_th must lie in (0, 1], got {}", self.psi_th)));
        }
        for (name, v) in [("pt_max", self.pt_max), ("pr_max", self.pr_max)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.outage_mode == OutageMode::SapAveraged {
            im_mapping::enumerate_saps(self.n, self.t)?;
        }
        Ok(())
    }

    /// Number of subcarriers carrying decision variables: `t` when the
    /// constraint is the single active pattern, `n` when it averages over
    /// every legitimate pattern.
    pub fn decision_width(&self) -> usize {
        match self.outage_mode {
            OutageMode::SingleSap => self.t,
            OutageMode::SapAveraged => self.n,
        }
    }
}

/// Source and relay powers of every decision subcarrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub pt: Vec<f64>,
    pub pr: Vec<f64>,
}

impl PowerAllocation {
    pub fn zeros(width: usize) -> Self {
        Self { pt: vec![0.0; width], pr: vec![0.0; width] }
    }

    pub fn uniform(width: usize, pt: f64, pr: f64) -> Self {
        Self { pt: vec![pt; width], pr: vec![pr; width] }
    }

    pub fn width(&self) -> usize {
        self.pt.len()
    }

    /// `Σ_i (pt[i] + pr[i])`, accumulated in subcarrier order.
    pub fn total_power(&self) -> f64 {
        total_power(&self.pt, &self.pr)
    }

    pub fn powers(&self) -> Vec<SubcarrierPower> {
        self.pt.iter().zip(&self.pr).map(|(&pt, &pr)| SubcarrierPower { pt, pr }).collect()
    }

    /// Checks lengths and the box constraints of `config`.
    pub fn validate(&self, config: &SystemConfig) -> Result<()> {
        let width = config.decision_width();
        for (what, len) in [("pt", self.pt.len()), ("pr", self.pr.len())] {
            if len != width {
                return Err(Error::ShapeMismatch {
                    expected: width,
                    actual: len,
                    context: if what == "pt" { "source powers" } else { "relay powers" },
                });
            }
        }
        for (name, values, cap) in [("pt", &self.pt, config.pt_max), ("pr", &self.pr, config.pr_max)] {
            if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0 && **v <= cap)) {
                return Err(Error::invalid(format!("{name} entry {v} outside [0, {cap}]")));
            }
        }
        Ok(())
    }

    /// Allocation with the subcarriers permuted: entry `i` of the result is
    /// entry `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self { pt: perm.iter().map(|&i| self.pt[i]).collect(), pr: perm.iter().map(|&i| self.pr[i]).collect() }
    }
}

pub(crate) fn total_power(pt: &[f64], pr: &[f64]) -> f64 {
    pt.iter().zip(pr).fold(0.0, |acc, (a, b)| acc + (a + b))
}

/// The outage constraint of a configuration, evaluated from per-subcarrier
/// outage probabilities.
#[derive(Debug, Clone)]
pub(crate) enum OutageConstraint {
    SingleSap,
    SapAveraged(SapSet),
}

impl OutageConstraint {
    pub(crate) fn for_config(config: &SystemConfig) -> Result<Self> {
        Ok(match config.outage_mode {
            OutageMode::SingleSap => OutageConstraint::SingleSap,
            OutageMode::SapAveraged => OutageConstraint::SapAveraged(im_mapping::enumerate_saps(config.n, config.t)?),
        })
    }

    pub(crate) fn outage(&self, phis: &[f64]) -> f64 {
        match self {
            OutageConstraint::SingleSap => crate::channel::block_outage(phis),
            OutageConstraint::SapAveraged(set) => crate::channel::sap_averaged_unchecked(phis, set),
        }
    }

    /// Largest per-subcarrier outage compatible with a block outage of
    /// `psi`: any pattern containing subcarrier `i` is in outage at least
    /// with probability `Φ_i`.
    pub(crate) fn per_subcarrier_cap(&self, index: usize, psi: f64) -> f64 {
        match self {
            OutageConstraint::SingleSap => psi,
            OutageConstraint::SapAveraged(set) => {
                let count = set.activation_count(index + 1);
                if count == 0 {
                    1.0
                } else {
                    (psi * set.xi() as f64 / count as f64).min(1.0)
                }
            }
        }
    }
}
