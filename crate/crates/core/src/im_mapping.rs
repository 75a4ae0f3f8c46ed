//! Subcarrier activation patterns (SAPs) for OFDM with index modulation.
//!
//! Of the `C(n, t)` ways to activate `t` of `n` subcarriers, only
//! `2^floor(log2 C(n, t))` patterns are used so that a whole number of index
//! bits selects one of them. The legitimate set is the first `Ξ` subsets in
//! lexicographic order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest subcarrier count accepted. Keeps `C(n, t)` inside `u64`.
pub const MAX_SUBCARRIERS: usize = 64;

/// Upper bound on the number of patterns [`enumerate_saps`] will materialize.
pub const MAX_ENUMERATED_SAPS: u64 = 1 << 20;

/// One activation pattern: strictly increasing, 1-based subcarrier indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sap {
    indices: Vec<usize>,
}

impl Sap {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("a SAP needs at least one active subcarrier"));
        }
        if indices.iter().any(|&i| i == 0 || i > n) {
            return Err(Error::invalid(format!("SAP indices {indices:?} must lie in [1, {n}]")));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!("SAP indices {indices:?} must be strictly increasing")));
        }
        Ok(Self { indices })
    }

    /// 1-based active subcarrier indices.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn max_index(&self) -> usize {
        *self.indices.last().expect("SAPs are never empty")
    }
}

/// The legitimate SAPs of an `(n, t)` configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SapSet {
    n: usize,
    t: usize,
    saps: Vec<Sap>,
}

impl SapSet {
    /// Builds a set from explicit patterns, e.g. a lookup table.
    pub fn from_saps(n: usize, t: usize, saps: Vec<Sap>) -> Result<Self> {
        if saps.is_empty() {
            return Err(Error::invalid("a SAP set cannot be empty"));
        }
        for sap in &saps {
            if sap.len() != t || sap.max_index() > n {
                return Err(Error::invalid(format!("SAP {:?} is not a {t}-subset of 1..={n}", sap.indices())));
            }
        }
        let mut sorted = saps.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != saps.len() {
            return Err(Error::invalid("SAP set contains duplicate patterns"));
        }
        Ok(Self { n, t, saps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Number of legitimate SAPs (Ξ).
    pub fn xi(&self) -> usize {
        self.saps.len()
    }

    pub fn saps(&self) -> &[Sap] {
        &self.saps
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sap> {
        self.saps.iter()
    }

    /// Largest subcarrier index referenced by any pattern.
    pub fn max_index(&self) -> usize {
        self.saps.iter().map(Sap::max_index).max().unwrap_or(0)
    }

    /// How many patterns activate subcarrier `index` (1-based).
    pub fn activation_count(&self, index: usize) -> usize {
        self.saps.iter().filter(|sap| sap.indices.binary_search(&index).is_ok()).count()
    }
}

fn check_nt(n: usize, t: usize) -> Result<()> {
    if t == 0 || t > n || n > MAX_SUBCARRIERS {
        return Err(Error::invalid(format!("need 1 <= t <= n <= {MAX_SUBCARRIERS}, got n = {n}, t = {t}")));
    }
    Ok(())
}

/// Exact binomial coefficient. `None` on overflow of `u64`.
pub fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step.
        acc = acc * u128::from(n - i) / u128::from(i + 1);
        if acc > u128::from(u64::MAX) {
            return None;
        }
    }
    Some(acc as u64)
}

/// `floor(log2 C(n, t))`: the number of index bits per block.
pub fn index_bits(n: usize, t: usize) -> Result<u32> {
    check_nt(n, t)?;
    let c = binomial(n as u64, t as u64).ok_or_else(|| Error::invalid(format!("C({n}, {t}) overflows u64")))?;
    Ok(63 - c.leading_zeros())
}

/// Ξ = 2^floor(log2 C(n, t)).
pub fn legitimate_sap_count(n: usize, t: usize) -> Result<u64> {
    Ok(1u64 << index_bits(n, t)?)
}

/// The first Ξ `t`-subsets of `{1..n}` in lexicographic order.
pub fn enumerate_saps(n: usize, t: usize) -> Result<SapSet> {
    let xi = legitimate_sap_count(n, t)?;
    if xi > MAX_ENUMERATED_SAPS {
        return Err(Error::invalid(format!(
            "(n, t) = ({n}, {t}) has {xi} legitimate SAPs, more than the {MAX_ENUMERATED_SAPS} that can be enumerated"
        )));
    }
    let mut saps = Vec::with_capacity(xi as usize);
    let mut current: Vec<usize> = (1..=t).collect();
    loop {
        saps.push(Sap { indices: current.clone() });
        if saps.len() as u64 == xi || !next_combination(&mut current, n) {
            break;
        }
    }
    Ok(SapSet { n, t, saps })
}

/// Advances to the lexicographic successor; false after the last subset.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let t = c.len();
    let mut i = t;
    while i > 0 {
        i -= 1;
        if c[i] < n - (t - 1 - i) {
            c[i] += 1;
            for j in i + 1..t {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Bits per OFDM-IM block: `floor(log2 C(n, t)) + t * log2(m)`.
pub fn bitstream_length(n: usize, t: usize, m: usize) -> Result<u32> {
    if m < 2 || !m.is_power_of_two() {
        return Err(Error::invalid(format!("PSK order must be a power of two >= 2, got {m}")));
    }
    Ok(index_bits(n, t)? + t as u32 * m.trailing_zeros())
}
