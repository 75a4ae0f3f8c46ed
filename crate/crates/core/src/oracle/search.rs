//! Exact minimization of total power over a lattice.
//!
//! The block outage depends on the decision variables only through the
//! per-subcarrier outages `Φ_i`, and it is non-decreasing in each of them.
//! So for every subcarrier only the cost/outage Pareto frontier of its
//! `(pt, pr)` lattice points matters. The search builds those frontiers and
//! combines them with branch and bound; the last subcarrier is resolved by
//! bisection because feasibility is monotone along its frontier.
//!
//! Levels run from a coarse sub-lattice to the full one. Sub-lattices are
//! nested, so each level's optimum bounds the next level's total, which
//! restricts the points that need evaluating to a thin band.

use std::cmp::Ordering;

use super::config::{total_power, OutageConstraint, SystemConfig};
use super::grid::SearchGrid;
use crate::channel::{self, SubcarrierStats};
use crate::error::{Error, Result};

/// Relative slack on pruning thresholds so that rounding never discards a
/// point the exact constraint would accept.
const PRUNE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
struct Point {
    a: usize,
    b: usize,
    cost: f64,
    phi: f64,
}

#[derive(Debug)]
struct Group {
    cost: f64,
    min_phi: f64,
    /// Sorted by `(a, b)`.
    points: Vec<Point>,
}

#[derive(Debug)]
struct Frontier {
    groups: Vec<Group>,
}

impl Frontier {
    fn build(mut pts: Vec<Point>) -> Self {
        pts.sort_by(|x, y| x.cost.total_cmp(&y.cost).then(x.a.cmp(&y.a)).then(x.b.cmp(&y.b)));
        let mut groups = Vec::new();
        let mut best_phi = f64::INFINITY;
        let mut i = 0;
        while i < pts.len() {
            let mut j = i;
            while j < pts.len() && pts[j].cost == pts[i].cost {
                j += 1;
            }
            let kept: Vec<Point> = pts[i..j].iter().copied().filter(|p| p.phi < best_phi).collect();
            if !kept.is_empty() {
                let min_phi = kept.iter().map(|p| p.phi).fold(f64::INFINITY, f64::min);
                groups.push(Group { cost: pts[i].cost, min_phi, points: kept });
                best_phi = min_phi;
            }
            i = j;
        }
        Self { groups }
    }

    fn min_cost(&self) -> Option<f64> {
        self.groups.first().map(|g| g.cost)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Incumbent {
    pub total: f64,
    /// `[a_0 .. a_{w-1}, b_0 .. b_{w-1}]` grid indices.
    pub key: Vec<usize>,
}

impl Incumbent {
    fn improves_on(&self, other: &Option<Incumbent>) -> bool {
        match other {
            None => true,
            Some(o) => match self.total.total_cmp(&o.total) {
                Ordering::Less => true,
                Ordering::Equal => self.key < o.key,
                Ordering::Greater => false,
            },
        }
    }
}

pub(crate) struct LevelSearch<'a> {
    pub stats: &'a [SubcarrierStats],
    pub config: &'a SystemConfig,
    pub constraint: &'a OutageConstraint,
    pub grid: &'a SearchGrid,
    pub evaluations: u64,
    pub max_evaluations: u64,
}

impl LevelSearch<'_> {
    fn phi(&mut self, i: usize, a: usize, b: usize) -> Result<f64> {
        self.evaluations += 1;
        if self.evaluations > self.max_evaluations {
            return Err(Error::BudgetExceeded { needed: self.evaluations, cap: self.max_evaluations });
        }
        let pt = self.grid.pt.points()[a];
        let pr = self.grid.pr.points()[b];
        Ok(channel::outage_unchecked(&self.stats[i], pt, pr, self.config.s))
    }

    /// Exact lattice optimum over the given index subsets among points whose
    /// total does not exceed `upper_bound`.
    pub fn run(&mut self, pt_idx: &[usize], pr_idx: &[usize], upper_bound: f64) -> Result<Option<Incumbent>> {
        let width = self.stats.len();
        let psi = self.config.psi_th;
        let pt = self.grid.pt.points();
        let pr = self.grid.pr.points();

        // Pass 1: for every (subcarrier, pt) the first pr meeting the
        // necessary per-subcarrier cap.
        let mut boundaries = Vec::with_capacity(width);
        let mut min_costs = Vec::with_capacity(width);
        for i in 0..width {
            let cap = self.constraint.per_subcarrier_cap(i, psi) * (1.0 + PRUNE_SLACK) + 1e-15;
            let mut row = Vec::with_capacity(pt_idx.len());
            let mut min_cost = f64::INFINITY;
            for &a in pt_idx {
                let hit = self.first_within(i, a, pr_idx, cap)?;
                if let Some((q, _)) = hit {
                    min_cost = min_cost.min(pt[a] + pr[pr_idx[q]]);
                }
                row.push(hit);
            }
            if !min_cost.is_finite() {
                return Ok(None);
            }
            boundaries.push(row);
            min_costs.push(min_cost);
        }

        // Pass 2: the band of points cheap enough to matter.
        let min_sum: f64 = min_costs.iter().sum();
        let mut frontiers = Vec::with_capacity(width);
        for i in 0..width {
            let budget = (upper_bound - (min_sum - min_costs[i])) * (1.0 + PRUNE_SLACK) + 1e-12;
            let mut pts = Vec::new();
            for (k, &a) in pt_idx.iter().enumerate() {
                let Some((q0, phi0)) = boundaries[i][k] else { continue };
                for (q, &b) in pr_idx.iter().enumerate().skip(q0) {
                    let cost = pt[a] + pr[b];
                    if cost > budget {
                        break;
                    }
                    let phi = if q == q0 { phi0 } else { self.phi(i, a, b)? };
                    pts.push(Point { a, b, cost, phi });
                }
            }
            let f = Frontier::build(pts);
            if f.groups.is_empty() {
                return Ok(None);
            }
            frontiers.push(f);
        }

        let mut best = None;
        let mut phis = vec![0.0; width];
        let mut key = vec![0; 2 * width];
        self.combine(&frontiers, 0, 0.0, &mut phis, &mut key, &mut best);
        Ok(best)
    }

    /// Position in `pr_idx` of the first relay power whose outage is at most
    /// `cap` (outage is non-increasing in relay power), with that outage.
    fn first_within(&mut self, i: usize, a: usize, pr_idx: &[usize], cap: f64) -> Result<Option<(usize, f64)>> {
        let last = pr_idx.len() - 1;
        let top = self.phi(i, a, pr_idx[last])?;
        if top > cap {
            return Ok(None);
        }
        let (mut lo, mut hi, mut hi_phi) = (0usize, last, top);
        // invariant: pr_idx[hi] satisfies the cap; everything below lo fails.
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            let phi = self.phi(i, a, pr_idx[mid])?;
            if phi <= cap {
                hi = mid;
                hi_phi = phi;
            } else {
                lo = mid + 1;
            }
        }
        Ok(Some((hi, hi_phi)))
    }

    fn combine(
        &self,
        frontiers: &[Frontier],
        i: usize,
        partial: f64,
        phis: &mut [f64],
        key: &mut [usize],
        best: &mut Option<Incumbent>,
    ) {
        let width = frontiers.len();
        let psi = self.config.psi_th;
        let groups = &frontiers[i].groups;

        if i + 1 == width {
            let feasible = |phi: f64, phis: &mut [f64]| {
                phis[i] = phi;
                self.constraint.outage(phis) <= psi
            };
            // Feasibility is monotone in the group index.
            let (mut lo, mut hi) = (0usize, groups.len());
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if feasible(groups[mid].min_phi, phis) {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            let Some(group) = groups.get(lo) else { return };
            let Some(point) = group.points.iter().find(|p| feasible(p.phi, phis)) else {
                return;
            };
            key[i] = point.a;
            key[width + i] = point.b;
            let candidate = Incumbent { total: partial + point.cost, key: key.to_vec() };
            if candidate.improves_on(best) {
                *best = Some(candidate);
            }
            return;
        }

        for group in groups {
            let mut bound = partial + group.cost;
            for f in &frontiers[i + 1..] {
                bound += f.min_cost().unwrap_or(0.0);
            }
            if let Some(b) = best {
                if bound > b.total {
                    break;
                }
            }
            for point in &group.points {
                phis[i] = point.phi;
                key[i] = point.a;
                key[width + i] = point.b;
                self.combine(frontiers, i + 1, partial + point.cost, phis, key, best);
            }
        }
    }
}

/// Total of an incumbent key, recomputed from the grid values.
pub(crate) fn key_allocation(grid: &SearchGrid, key: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let w = key.len() / 2;
    let pt = key[..w].iter().map(|&a| grid.pt.points()[a]).collect();
    let pr = key[w..].iter().map(|&b| grid.pr.points()[b]).collect();
    (pt, pr)
}

pub(crate) fn key_total(grid: &SearchGrid, key: &[usize]) -> f64 {
    let (pt, pr) = key_allocation(grid, key);
    total_power(&pt, &pr)
}
