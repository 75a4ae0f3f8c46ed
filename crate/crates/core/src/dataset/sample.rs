use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::SubcarrierStats;
use crate::error::{Error, Result};

/// The `4 × T` statistics matrix of one problem instance.
///
/// Rows are `mu1`, `mu2`, `eta1`, `eta2`; column `i` describes subcarrier
/// `i`. Stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SampleMatrix {
    t: usize,
    values: Vec<f64>,
}

impl SampleMatrix {
    pub const ROWS: usize = 4;

    pub fn new(t: usize, values: Vec<f64>) -> Result<Self> {
        if t == 0 || values.len() != Self::ROWS * t {
            return Err(Error::ShapeMismatch {
                expected: Self::ROWS * t.max(1),
                actual: values.len(),
                context: "sample matrix entries",
            });
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::invalid(format!("sample entries must be positive, got {v}")));
        }
        Ok(Self { t, values })
    }

    pub fn from_stats(stats: &[SubcarrierStats]) -> Result<Self> {
        let t = stats.len();
        let mut values = Vec::with_capacity(4 * t);
        values.extend(stats.iter().map(|s| s.mu1));
        values.extend(stats.iter().map(|s| s.mu2));
        values.extend(stats.iter().map(|s| s.eta1));
        values.extend(stats.iter().map(|s| s.eta2));
        Self::new(t, values)
    }

    /// Number of subcarrier columns.
    pub fn width(&self) -> usize {
        self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.t..(r + 1) * self.t]
    }

    pub fn stats(&self) -> Vec<SubcarrierStats> {
        (0..self.t)
            .map(|i| SubcarrierStats {
                mu1: self.row(0)[i],
                mu2: self.row(1)[i],
                eta1: self.row(2)[i],
                eta2: self.row(3)[i],
            })
            .collect()
    }

    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.values.iter().all(|v| (lo..=hi).contains(v))
    }
}

impl TryFrom<Vec<Vec<f64>>> for SampleMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != Self::ROWS {
            return Err(Error::ShapeMismatch {
                expected: Self::ROWS,
                actual: rows.len(),
                context: "sample matrix rows",
            });
        }
        let t = rows[0].len();
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::invalid("sample matrix rows differ in length"));
        }
        Self::new(t, rows.concat())
    }
}

impl From<SampleMatrix> for Vec<Vec<f64>> {
    fn from(m: SampleMatrix) -> Self {
        m.values.chunks(m.t).map(<[f64]>::to_vec).collect()
    }
}

fn check_range(range_lo: f64, range_hi: f64) -> Result<()> {
    if !(range_lo.is_finite() && range_hi.is_finite() && range_lo > 0.0 && range_lo < range_hi) {
        return Err(Error::invalid(format!("need 0 < range_lo < range_hi, got [{range_lo}, {range_hi}]")));
    }
    Ok(())
}

/// Stream of independent uniform sample matrices.
pub struct SampleStream {
    rng: ChaCha8Rng,
    lo: f64,
    hi: f64,
    t: usize,
}

impl SampleStream {
    pub fn new(range_lo: f64, range_hi: f64, t: usize, seed: u64) -> Result<Self> {
        check_range(range_lo, range_hi)?;
        if t == 0 {
            return Err(Error::invalid("samples need at least one subcarrier"));
        }
        Ok(Self { rng: ChaCha8Rng::seed_from_u64(seed), lo: range_lo, hi: range_hi, t })
    }

    pub fn draw(&mut self) -> SampleMatrix {
        let values = (0..SampleMatrix::ROWS * self.t).map(|_| self.rng.random_range(self.lo..=self.hi)).collect();
        SampleMatrix { t: self.t, values }
    }
}

/// `count` matrices with entries i.i.d. uniform on `[range_lo, range_hi]`.
pub fn generate_samples(count: usize, range_lo: f64, range_hi: f64, t: usize, seed: u64) -> Result<Vec<SampleMatrix>> {
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    let mut stream = SampleStream::new(range_lo, range_hi, t, seed)?;
    Ok((0..count).map(|_| stream.draw()).collect())
}

/// Every matrix whose entries take one of `levels` evenly spaced values in
/// `[range_lo, range_hi]`, in lexicographic order: `levels^(4t)` samples.
pub fn grid_samples(levels: usize, range_lo: f64, range_hi: f64, t: usize) -> Result<Vec<SampleMatrix>> {
    check_range(range_lo, range_hi)?;
    if levels < 2 {
        return Err(Error::invalid("a grid needs at least 2 levels"));
    }
    let entries = SampleMatrix::ROWS * t;
    let count = (levels as u64)
        .checked_pow(entries as u32)
        .filter(|&c| c <= 10_000_000)
        .ok_or_else(|| Error::invalid(format!("{levels}^{entries} grid samples is too many")))?;
    let step = (range_hi - range_lo) / (levels - 1) as f64;
    let value = |k: usize| if k == levels - 1 { range_hi } else { range_lo + step * k as f64 };
    let mut digits = vec![0usize; entries];
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        out.push(SampleMatrix { t, values: digits.iter().map(|&k| value(k)).collect() });
        for d in (0..entries).rev() {
            digits[d] += 1;
            if digits[d] < levels {
                break;
            }
            digits[d] = 0;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_draws_are_deterministic_and_in_range() {
        let a = generate_samples(50, 0.5, 5.0, 2, 7).unwrap();
        assert_eq!(a, generate_samples(50, 0.5, 5.0, 2, 7).unwrap());
        assert_ne!(a, generate_samples(50, 0.5, 5.0, 2, 8).unwrap());
        assert!(a.iter().all(|s| s.within(0.5, 5.0) && s.width() == 2));
        let mut flat: Vec<f64> = a.iter().flat_map(|s| s.values().to_vec()).collect();
        flat.sort_by(f64::total_cmp);
        flat.dedup();
        assert_eq!(flat.len(), 50 * 8);
    }

    #[test]
    fn empirical_mean_is_midpoint() {
        let draws = generate_samples(100_000, 0.5, 5.0, 2, 1).unwrap();
        for k in 0..8 {
            let mean = draws.iter().map(|s| s.values()[k]).sum::<f64>() / draws.len() as f64;
            assert!((mean - 2.75).abs() < 0.01 * 2.75, "entry {k}: {mean}");
        }
    }

    #[test]
    fn degenerate_ranges_rejected() {
        assert!(generate_samples(3, 1.0, 1.0, 2, 0).is_err());
        assert!(generate_samples(3, 2.0, 1.0, 2, 0).is_err());
        assert!(generate_samples(3, 0.0, 1.0, 2, 0).is_err());
        assert!(generate_samples(0, 0.5, 5.0, 2, 0).is_err());
    }

    #[test]
    fn three_level_lattice() {
        let g = grid_samples(3, 0.5, 5.0, 2).unwrap();
        assert_eq!(g.len(), 6561);
        assert_eq!(g[0].values(), &[0.5; 8]);
        assert_eq!(g[6560].values(), &[5.0; 8]);
        assert_eq!(g[1].values()[7], 2.75);
    }

    #[test]
    fn stats_layout_and_serde() {
        let s = SampleMatrix::new(2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        let st = s.stats();
        assert_eq!(st[1], SubcarrierStats { mu1: 2.0, mu2: 4.0, eta1: 6.0, eta2: 8.0 });
        assert_eq!(SampleMatrix::from_stats(&st).unwrap(), s);
        let js = serde_json::to_string(&s).unwrap();
        assert_eq!(js, "[[1.0,2.0],[3.0,4.0],[5.0,6.0],[7.0,8.0]]");
        assert_eq!(serde_json::from_str::<SampleMatrix>(&js).unwrap(), s);
        assert!(serde_json::from_str::<SampleMatrix>("[[1.0],[2.0]]").is_err());
    }
}
