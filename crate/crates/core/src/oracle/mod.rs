//! Ground-truth solver for the total-power minimization problem.
//!
//! Minimize `Σ_i (pt_i + pr_i)` subject to the block outage staying at or
//! below `psi_th` and `0 <= pt_i <= pt_max`, `0 <= pr_i <= pr_max`.
//!
//! [`solve`] returns the exact minimizer over a log-spaced lattice whose
//! relative resolution is `delta`; ties in total power go to the
//! lexicographically smallest `(pt_1, .., pt_T, pr_1, .., pr_T)`.
//! [`brute_force_reference`] enumerates a small lattice point by point and
//! exists to check [`solve`].

mod config;
mod grid;
mod search;

use serde::{Deserialize, Serialize};

pub use config::{PowerAllocation, SystemConfig, DEFAULT_POWER_CAP};
pub use grid::{points_for_delta, AxisGrid, SearchGrid, DEFAULT_FLOOR_RATIO};

use crate::channel::{self, OutageMode, SubcarrierStats};
use crate::error::{Error, Result};
use config::OutageConstraint;
use search::{key_allocation, key_total, LevelSearch};

/// Default relative per-axis resolution.
pub const DEFAULT_DELTA: f64 = 1e-2;

/// Largest per-axis point count accepted by [`brute_force_reference`].
pub const BRUTE_FORCE_MAX_POINTS: usize = 12;

/// Largest number of lattice points the flat enumeration will visit.
pub const BRUTE_FORCE_MAX_COMBINATIONS: u64 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    /// Block outage with every subcarrier at its caps.
    pub achieved_outage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub allocation: PowerAllocation,
    pub total_power: f64,
    pub achieved_outage: f64,
    pub feasible: bool,
    /// Relative per-axis resolution of the final lattice.
    pub accuracy: f64,
    /// Per-subcarrier outage evaluations spent.
    pub evaluations: u64,
    /// Coarse-to-fine levels run (1 for the flat enumeration).
    pub levels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    /// Smallest positive lattice point relative to the cap.
    pub floor_ratio: f64,
    /// Target number of intervals per axis at the coarsest level.
    pub coarse_intervals: usize,
    pub max_evaluations: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { floor_ratio: DEFAULT_FLOOR_RATIO, coarse_intervals: 16, max_evaluations: 500_000_000 }
    }
}

fn check_stats(stats: &[SubcarrierStats], config: &SystemConfig) -> Result<()> {
    let width = config.decision_width();
    if stats.len() != width {
        return Err(Error::ShapeMismatch { expected: width, actual: stats.len(), context: "subcarrier stats" });
    }
    stats.iter().try_for_each(SubcarrierStats::validate)
}

/// Block outage of `allocation` under the configured outage mode, through
/// the validated public evaluators.
pub fn allocation_outage(
    stats: &[SubcarrierStats],
    config: &SystemConfig,
    allocation: &PowerAllocation,
) -> Result<f64> {
    check_stats(stats, config)?;
    if allocation.width() != stats.len() || allocation.pr.len() != stats.len() {
        return Err(Error::ShapeMismatch {
            expected: stats.len(),
            actual: allocation.width(),
            context: "allocation width",
        });
    }
    let phis = stats
        .iter()
        .zip(allocation.powers())
        .map(|(st, pw)| channel::subcarrier_outage(st, pw, config.s))
        .collect::<Result<Vec<_>>>()?;
    match config.outage_mode {
        OutageMode::SingleSap => Ok(channel::block_outage(&phis)),
        OutageMode::SapAveraged => {
            let set = crate::im_mapping::enumerate_saps(config.n, config.t)?;
            channel::sap_averaged_outage(&phis, &set)
        }
    }
}

/// Whether the outage cap is met with every subcarrier at both power caps.
pub fn feasibility_check(stats: &[SubcarrierStats], config: &SystemConfig) -> Result<Feasibility> {
    config.validate()?;
    let full = PowerAllocation::uniform(stats.len(), config.pt_max, config.pr_max);
    let achieved_outage = allocation_outage(stats, config, &full)?;
    Ok(Feasibility { feasible: achieved_outage <= config.psi_th, achieved_outage })
}

fn require_feasible(stats: &[SubcarrierStats], config: &SystemConfig) -> Result<()> {
    let f = feasibility_check(stats, config)?;
    if !f.feasible {
        return Err(Error::Infeasible { achieved: f.achieved_outage, threshold: config.psi_th });
    }
    Ok(())
}

/// Upper bound on the evaluations [`Oracle::solve_on_grid`] spends: per
/// level, a bisection and a band sweep for every `(subcarrier, pt)` pair.
/// With `g` points per axis this is `O(w g²)`, i.e. `O(1/δ²)` in the
/// resolution.
pub fn evaluation_budget(width: usize, grid: &SearchGrid, coarse_intervals: usize) -> u64 {
    level_strides(grid, coarse_intervals)
        .into_iter()
        .map(|stride| {
            let gp = grid.pt.level_indices(stride).len() as u64;
            let gr = grid.pr.level_indices(stride).len() as u64;
            let bisect = u64::from(64 - gr.leading_zeros()) + 1;
            width as u64 * gp * (gr + bisect)
        })
        .sum()
}

/// How much the optimum total can move between resolutions: rounding every
/// coordinate of a finer-lattice optimum up to this lattice costs at most a
/// factor `1 + δ` above the smallest positive point and that point below it.
pub fn resolution_bound(total_power: f64, grid: &SearchGrid, width: usize) -> f64 {
    grid.resolution() * total_power + 2.0 * width as f64 * grid.smallest_step()
}

fn level_strides(grid: &SearchGrid, coarse_intervals: usize) -> Vec<usize> {
    let intervals = grid.pt.len().max(grid.pr.len()).saturating_sub(2).max(1);
    let ratio = (intervals / coarse_intervals.max(1)).max(1);
    let mut stride = 1usize << (usize::BITS - 1 - ratio.leading_zeros());
    let mut strides = vec![stride];
    while stride > 1 {
        stride /= 2;
        strides.push(stride);
    }
    strides
}

/// Coarse-to-fine lattice solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct Oracle {
    pub options: OracleOptions,
}

impl Oracle {
    pub fn new(options: OracleOptions) -> Self {
        Self { options }
    }

    pub fn solve(&self, stats: &[SubcarrierStats], config: &SystemConfig, delta: f64) -> Result<OracleResult> {
        config.validate()?;
        let grid = SearchGrid::for_delta(config, delta, self.options.floor_ratio)?;
        let mut result = self.solve_on_grid(stats, config, &grid)?;
        result.accuracy = delta;
        Ok(result)
    }

    pub fn solve_on_grid(
        &self,
        stats: &[SubcarrierStats],
        config: &SystemConfig,
        grid: &SearchGrid,
    ) -> Result<OracleResult> {
        config.validate()?;
        check_stats(stats, config)?;
        require_feasible(stats, config)?;
        let width = stats.len();
        let constraint = OutageConstraint::for_config(config)?;

        let pt_top = grid.pt.len() - 1;
        let pr_top = grid.pr.len() - 1;
        let mut key: Vec<usize> =
            std::iter::repeat(pt_top).take(width).chain(std::iter::repeat(pr_top).take(width)).collect();
        let mut upper = key_total(grid, &key);

        let mut search = LevelSearch {
            stats,
            config,
            constraint: &constraint,
            grid,
            evaluations: 0,
            max_evaluations: self.options.max_evaluations,
        };
        let strides = level_strides(grid, self.options.coarse_intervals);
        for &stride in &strides {
            let pt_idx = grid.pt.level_indices(stride);
            let pr_idx = grid.pr.level_indices(stride);
            if let Some(found) = search.run(&pt_idx, &pr_idx, upper)? {
                upper = found.total;
                key = found.key;
            }
        }

        let (pt, pr) = key_allocation(grid, &key);
        let allocation = PowerAllocation { pt, pr };
        finish(stats, config, allocation, grid.resolution(), search.evaluations, strides.len())
    }
}

fn finish(
    stats: &[SubcarrierStats],
    config: &SystemConfig,
    allocation: PowerAllocation,
    accuracy: f64,
    evaluations: u64,
    levels: usize,
) -> Result<OracleResult> {
    let achieved_outage = allocation_outage(stats, config, &allocation)?;
    if achieved_outage > config.psi_th {
        return Err(Error::Internal(format!(
            "oracle returned {allocation:?} with outage {achieved_outage:e} above {:e}",
            config.psi_th
        )));
    }
    Ok(OracleResult {
        total_power: allocation.total_power(),
        allocation,
        achieved_outage,
        feasible: true,
        accuracy,
        evaluations,
        levels,
    })
}

/// [`Oracle::solve`] with default options.
pub fn solve(stats: &[SubcarrierStats], config: &SystemConfig, delta: f64) -> Result<OracleResult> {
    Oracle::default().solve(stats, config, delta)
}

/// Flat enumeration of every lattice point with `grid_points_per_axis`
/// points per axis (zero included), default floor ratio.
pub fn brute_force_reference(
    stats: &[SubcarrierStats],
    config: &SystemConfig,
    grid_points_per_axis: usize,
) -> Result<OracleResult> {
    if grid_points_per_axis > BRUTE_FORCE_MAX_POINTS {
        return Err(Error::BudgetExceeded { needed: grid_points_per_axis as u64, cap: BRUTE_FORCE_MAX_POINTS as u64 });
    }
    config.validate()?;
    let grid = SearchGrid::log_spaced(config, grid_points_per_axis, DEFAULT_FLOOR_RATIO)?;
    brute_force_on_grid(stats, config, &grid)
}

/// Visits lattice points in lexicographic order of
/// `(pt_1, .., pt_w, pr_1, .., pr_w)` and keeps the first strictly cheaper
/// feasible one.
pub fn brute_force_on_grid(
    stats: &[SubcarrierStats],
    config: &SystemConfig,
    grid: &SearchGrid,
) -> Result<OracleResult> {
    config.validate()?;
    check_stats(stats, config)?;
    require_feasible(stats, config)?;
    let width = stats.len();
    let radices: Vec<usize> =
        std::iter::repeat(grid.pt.len()).take(width).chain(std::iter::repeat(grid.pr.len()).take(width)).collect();
    let combos = radices
        .iter()
        .try_fold(1u64, |acc, &r| acc.checked_mul(r as u64))
        .filter(|&c| c <= BRUTE_FORCE_MAX_COMBINATIONS)
        .ok_or(Error::BudgetExceeded { needed: u64::MAX, cap: BRUTE_FORCE_MAX_COMBINATIONS })?;

    let set = match config.outage_mode {
        OutageMode::SapAveraged => Some(crate::im_mapping::enumerate_saps(config.n, config.t)?),
        OutageMode::SingleSap => None,
    };
    let mut digits = vec![0usize; 2 * width];
    let mut best: Option<(f64, PowerAllocation)> = None;
    let mut evaluations = 0u64;
    for _ in 0..combos {
        let allocation = PowerAllocation {
            pt: digits[..width].iter().map(|&a| grid.pt.points()[a]).collect(),
            pr: digits[width..].iter().map(|&b| grid.pr.points()[b]).collect(),
        };
        let total = allocation.total_power();
        if best.as_ref().map_or(true, |(t, _)| total < *t) {
            let mut phis = Vec::with_capacity(width);
            for (st, pw) in stats.iter().zip(allocation.powers()) {
                phis.push(channel::subcarrier_outage(st, pw, config.s)?);
            }
            evaluations += width as u64;
            let outage = match &set {
                None => channel::block_outage(&phis),
                Some(set) => channel::sap_averaged_outage(&phis, set)?,
            };
            if outage <= config.psi_th {
                best = Some((total, allocation));
            }
        }
        // odometer, last digit fastest
        for d in (0..digits.len()).rev() {
            digits[d] += 1;
            if digits[d] < radices[d] {
                break;
            }
            digits[d] = 0;
        }
    }
    let (_, allocation) = best.ok_or_else(|| Error::Internal("no feasible lattice point".into()))?;
    finish(stats, config, allocation, grid.resolution(), evaluations, 1)
}

#[cfg(test)]
mod tests;
