use serde::{Deserialize, Serialize};

use super::config::SystemConfig;
use crate::error::{Error, Result};

/// Default smallest positive grid point, relative to the axis cap.
pub const DEFAULT_FLOOR_RATIO: f64 = 1e-4;

/// Candidate powers on one axis: the exact zero followed by log-spaced
/// positive values ending exactly at the cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisGrid {
    points: Vec<f64>,
}

impl AxisGrid {
    /// `total_points` counts the zero point, so 2 gives `{0, max}`.
    pub fn log_spaced(max: f64, total_points: usize, floor_ratio: f64) -> Result<Self> {
        if !(max.is_finite() && max > 0.0) {
            return Err(Error::invalid(format!("axis cap must be positive, got {max}")));
        }
        if !(floor_ratio > 0.0 && floor_ratio < 1.0) {
            return Err(Error::invalid(format!("floor ratio must lie in (0, 1), got {floor_ratio}")));
        }
        if total_points < 2 {
            return Err(Error::invalid(format!(
                "an axis needs at least 2 points (zero and the cap), got {total_points}"
            )));
        }
        let positive = total_points - 1;
        let mut points = Vec::with_capacity(total_points);
        points.push(0.0);
        if positive == 1 {
            points.push(max);
        } else {
            let span = (positive - 1) as f64;
            for j in 0..positive - 1 {
                let exponent = (positive - 1 - j) as f64 / span;
                points.push(max * floor_ratio.powf(exponent));
            }
            points.push(max);
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max(&self) -> f64 {
        *self.points.last().expect("axis grids are never empty")
    }

    /// Largest relative gap between consecutive positive points.
    pub fn resolution(&self) -> f64 {
        self.points[1..].windows(2).map(|w| w[1] / w[0] - 1.0).fold(0.0, f64::max)
    }

    /// Grid indices kept at a given stride: zero, the smallest positive
    /// point, and every `stride`-th positive point counted down from the cap.
    /// Strides that divide each other give nested subsets.
    pub(crate) fn level_indices(&self, stride: usize) -> Vec<usize> {
        let positive = self.points.len() - 1;
        let mut idx = vec![0];
        for j in 0..positive {
            if j == 0 || (positive - 1 - j) % stride == 0 {
                idx.push(j + 1);
            }
        }
        idx
    }
}

/// Total points per axis (zero included) for relative resolution `delta`.
pub fn points_for_delta(delta: f64, floor_ratio: f64) -> Result<usize> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    if !(floor_ratio > 0.0 && floor_ratio < 1.0) {
        return Err(Error::invalid(format!("floor ratio must lie in (0, 1), got {floor_ratio}")));
    }
    let intervals = ((1.0 / floor_ratio).ln() / delta.ln_1p()).ceil().max(1.0);
    if intervals > 1e7 {
        return Err(Error::invalid(format!("delta = {delta} needs {intervals} grid points per axis")));
    }
    Ok(intervals as usize + 2)
}

/// The lattice searched by the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub pt: AxisGrid,
    pub pr: AxisGrid,
}

impl SearchGrid {
    pub fn log_spaced(config: &SystemConfig, total_points: usize, floor_ratio: f64) -> Result<Self> {
        Ok(Self {
            pt: AxisGrid::log_spaced(config.pt_max, total_points, floor_ratio)?,
            pr: AxisGrid::log_spaced(config.pr_max, total_points, floor_ratio)?,
        })
    }

    pub fn for_delta(config: &SystemConfig, delta: f64, floor_ratio: f64) -> Result<Self> {
        Self::log_spaced(config, points_for_delta(delta, floor_ratio)?, floor_ratio)
    }

    pub fn resolution(&self) -> f64 {
        self.pt.resolution().max(self.pr.resolution())
    }

    /// Smallest positive power on either axis.
    pub fn smallest_step(&self) -> f64 {
        self.pt.points()[1].max(self.pr.points()[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_are_zero_and_cap() {
        let g = AxisGrid::log_spaced(5000.0, 2, 1e-4).unwrap();
        assert_eq!(g.points(), &[0.0, 5000.0]);
    }

    #[test]
    fn log_spacing() {
        let g = AxisGrid::log_spaced(5000.0, 6, 1e-4).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.points()[0], 0.0);
        assert!((g.points()[1] - 0.5).abs() < 1e-12);
        assert_eq!(g.max(), 5000.0);
        assert!((g.resolution() - 9.0).abs() < 1e-9);
        assert!(g.points().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn delta_sets_resolution() {
        for delta in [0.5, 0.1, 0.01, 0.003] {
            let n = points_for_delta(delta, 1e-4).unwrap();
            let g = AxisGrid::log_spaced(1.0, n, 1e-4).unwrap();
            assert!(g.resolution() <= delta * (1.0 + 1e-9), "{delta}");
            let coarser = AxisGrid::log_spaced(1.0, n - 1, 1e-4).unwrap();
            assert!(coarser.resolution() > delta);
        }
        assert!(points_for_delta(0.0, 1e-4).is_err());
        assert!(points_for_delta(1e-3, 1.0).is_err());
    }

    #[test]
    fn level_indices_nest() {
        let g = AxisGrid::log_spaced(1.0, 130, 1e-4).unwrap();
        let mut prev: Option<Vec<usize>> = None;
        for stride in [16, 8, 4, 2, 1] {
            let idx = g.level_indices(stride);
            assert_eq!(idx[0], 0);
            assert_eq!(idx[1], 1);
            assert_eq!(*idx.last().unwrap(), 129);
            if let Some(p) = prev {
                assert!(p.iter().all(|i| idx.contains(i)));
            }
            prev = Some(idx);
        }
        assert_eq!(g.level_indices(1), (0..130).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_bad_axes() {
        assert!(AxisGrid::log_spaced(0.0, 4, 1e-4).is_err());
        assert!(AxisGrid::log_spaced(1.0, 1, 1e-4).is_err());
        assert!(AxisGrid::log_spaced(1.0, 4, 0.0).is_err());
    }
}
