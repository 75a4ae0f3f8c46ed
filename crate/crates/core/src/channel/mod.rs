//! Outage probability of a two-hop fixed-gain amplify-and-forward link.
//!
//! Both hops are Rayleigh faded, so the channel power gains are exponential
//! with means `mu1`, `mu2`. A subcarrier is in outage when its end-to-end SNR
//! falls below the threshold `s`; a block is in outage when any active
//! subcarrier is.

mod bessel;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::im_mapping::SapSet;

pub use bessel::{bessel_k1, bessel_k1_scaled};

/// Closed-form results may leave [0, 1] by rounding only; anything further
/// out means the special-function evaluation is broken.
const PROBABILITY_SLACK: f64 = 1e-12;

/// Smallest trial count accepted by [`monte_carlo_outage`].
pub const MIN_MC_TRIALS: u64 = 10_000;

/// Statistical CSI and noise powers of one subcarrier, linear units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubcarrierStats {
    /// Average channel power gain, source to relay.
    pub mu1: f64,
    /// Average channel power gain, relay to destination.
    pub mu2: f64,
    /// Average noise power at the relay.
    pub eta1: f64,
    /// Average noise power at the destination.
    pub eta2: f64,
}

impl SubcarrierStats {
    pub fn new(mu1: f64, mu2: f64, eta1: f64, eta2: f64) -> Result<Self> {
        let stats = Self { mu1, mu2, eta1, eta2 };
        stats.validate()?;
        Ok(stats)
    }

    pub fn unit() -> Self {
        Self { mu1: 1.0, mu2: 1.0, eta1: 1.0, eta2: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mu1", self.mu1), ("mu2", self.mu2), ("eta1", self.eta1), ("eta2", self.eta2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Source power and relay gain on one subcarrier, linear units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubcarrierPower {
    pub pt: f64,
    pub pr: f64,
}

impl SubcarrierPower {
    pub fn new(pt: f64, pr: f64) -> Result<Self> {
        let p = Self { pt, pr };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("pt", self.pt), ("pr", self.pr)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

fn check_threshold(s: f64) -> Result<()> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::invalid(format!("outage threshold s must be finite and positive, got {s}")));
    }
    Ok(())
}

/// End-to-end SNR `pt pr g1 g2 / (pr g2 eta1 + eta2)` for one fading draw.
pub fn end_to_end_snr(g1: f64, g2: f64, power: SubcarrierPower, eta1: f64, eta2: f64) -> f64 {
    let num = power.pt * power.pr * g1 * g2;
    if num == 0.0 {
        return 0.0;
    }
    num / (power.pr * g2 * eta1 + eta2)
}

/// Closed-form per-subcarrier outage probability
/// `1 - 2√A exp(-s eta1 / (mu1 pt)) K1(2√A)` with
/// `A = s eta2 / (mu1 mu2 pt pr)`.
///
/// Zero source or relay power gives outage 1 (the limit of the formula).
pub fn subcarrier_outage(stats: &SubcarrierStats, power: SubcarrierPower, s: f64) -> Result<f64> {
    stats.validate()?;
    power.validate()?;
    check_threshold(s)?;
    let phi = outage_raw(stats, power.pt, power.pr, s);
    if !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&phi) {
        return Err(Error::Internal(format!(
            "closed-form outage {phi:e} outside [0, 1] for {stats:?}, {power:?}, s = {s}"
        )));
    }
    Ok(phi.clamp(0.0, 1.0))
}

/// Unvalidated evaluation for hot loops; inputs must already satisfy the
/// type invariants. The result is clamped to [0, 1].
pub(crate) fn outage_unchecked(stats: &SubcarrierStats, pt: f64, pr: f64, s: f64) -> f64 {
    outage_raw(stats, pt, pr, s).clamp(0.0, 1.0)
}

fn outage_raw(stats: &SubcarrierStats, pt: f64, pr: f64, s: f64) -> f64 {
    if pt == 0.0 || pr == 0.0 {
        return 1.0;
    }
    let b = s * stats.eta1 / (stats.mu1 * pt);
    let a = s * stats.eta2 / (stats.mu1 * stats.mu2 * pt * pr);
    let z = 2.0 * a.sqrt();
    if z == 0.0 {
        return -(-b).exp_m1();
    }
    if z <= 2.0 {
        // (1 - e^-b) + e^-b (1 - z K1(z)), both parts non-negative.
        let eb = (-b).exp();
        -(-b).exp_m1() + eb * bessel::one_minus_x_k1(z)
    } else {
        // Scaled form keeps z K1(z) e^-b from underflowing term by term.
        1.0 - z * bessel::k1_scaled_unchecked(z) * (-(z + b)).exp()
    }
}

/// How per-subcarrier outages combine into the block outage constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutageMode {
    /// `1 - Π (1 - Φ_i)` over the parameterized (active) subcarriers.
    #[default]
    SingleSap,
    /// Average over the legitimate SAPs, needs stats for all `n` subcarriers.
    SapAveraged,
}

impl std::fmt::Display for OutageMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OutageMode::SingleSap => "single-sap",
            OutageMode::SapAveraged => "sap-averaged",
        })
    }
}

impl std::str::FromStr for OutageMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-sap" => Ok(OutageMode::SingleSap),
            "sap-averaged" => Ok(OutageMode::SapAveraged),
            other => {
                Err(Error::invalid(format!("unknown outage mode {other:?} (expected single-sap or sap-averaged)")))
            }
        }
    }
}

/// Everything needed to evaluate the SAP-averaged outage of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageQuery {
    pub s: f64,
    pub stats: Vec<SubcarrierStats>,
    pub powers: Vec<SubcarrierPower>,
    pub sap_set: SapSet,
}

/// Block outage with every listed subcarrier active: `1 - Π (1 - Φ_i)`.
pub fn block_outage(phis: &[f64]) -> f64 {
    let survive: f64 = phis.iter().map(|p| 1.0 - p).product();
    (1.0 - survive).clamp(0.0, 1.0)
}

/// `(1/Ξ) Σ_k [1 - Π_{i ∈ T(k)} (1 - Φ_i)]` from precomputed per-subcarrier
/// outages (`phis[i - 1]` belongs to subcarrier `i`).
pub fn sap_averaged_outage(phis: &[f64], sap_set: &SapSet) -> Result<f64> {
    if sap_set.max_index() > phis.len() {
        return Err(Error::IndexOutOfRange { index: sap_set.max_index(), available: phis.len() });
    }
    Ok(sap_averaged_unchecked(phis, sap_set))
}

pub(crate) fn sap_averaged_unchecked(phis: &[f64], sap_set: &SapSet) -> f64 {
    let mut total = 0.0;
    for sap in sap_set.iter() {
        let survive: f64 = sap.indices().iter().map(|&i| 1.0 - phis[i - 1]).product();
        total += 1.0 - survive;
    }
    (total / sap_set.xi() as f64).clamp(0.0, 1.0)
}

/// Average outage over the legitimate SAPs of `query.sap_set`.
pub fn average_outage(query: &OutageQuery) -> Result<f64> {
    check_threshold(query.s)?;
    if query.stats.len() != query.powers.len() {
        return Err(Error::ShapeMismatch {
            expected: query.stats.len(),
            actual: query.powers.len(),
            context: "powers per subcarrier",
        });
    }
    let needed = query.sap_set.max_index();
    if needed > query.stats.len() {
        return Err(Error::IndexOutOfRange { index: needed, available: query.stats.len() });
    }
    let phis = query
        .stats
        .iter()
        .zip(&query.powers)
        .map(|(st, &pw)| subcarrier_outage(st, pw, query.s))
        .collect::<Result<Vec<_>>>()?;
    sap_averaged_outage(&phis, &query.sap_set)
}

/// Monte-Carlo estimate of a subcarrier outage with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub p: f64,
    pub std_error: f64,
    pub trials: u64,
}

impl McEstimate {
    /// Whether `value` lies within `k` standard errors of the estimate.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.p - value).abs() <= k * self.std_error
    }
}

/// Samples both fading hops and counts end-to-end SNRs below `s`.
///
/// Deterministic for a given `seed`; each call owns its generator.
pub fn monte_carlo_outage(
    stats: &SubcarrierStats,
    power: SubcarrierPower,
    s: f64,
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    stats.validate()?;
    power.validate()?;
    check_threshold(s)?;
    if trials < MIN_MC_TRIALS {
        return Err(Error::invalid(format!("Monte-Carlo needs at least {MIN_MC_TRIALS} trials, got {trials}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outages = 0u64;
    for _ in 0..trials {
        let e1: f64 = Exp1.sample(&mut rng);
        let e2: f64 = Exp1.sample(&mut rng);
        let g1 = stats.mu1 * e1;
        let g2 = stats.mu2 * e2;
        if end_to_end_snr(g1, g2, power, stats.eta1, stats.eta2) < s {
            outages += 1;
        }
    }
    let p = outages as f64 / trials as f64;
    Ok(McEstimate { p, std_error: (p * (1.0 - p) / trials as f64).sqrt(), trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::im_mapping::{enumerate_saps, Sap};

    fn power(pt: f64, pr: f64) -> SubcarrierPower {
        SubcarrierPower::new(pt, pr).unwrap()
    }

    #[test]
    fn snr_examples() {
        let one = power(1.0, 1.0);
        assert_eq!(end_to_end_snr(1.0, 1.0, one, 1.0, 1.0), 0.5);
        assert_eq!(end_to_end_snr(1.3, 0.7, power(0.0, 3.0), 0.9, 1.1), 0.0);
        let (pt, g1, eta1) = (2.5, 0.8, 1.7);
        let limit = pt * g1 / eta1;
        let got = end_to_end_snr(g1, 1.2, power(pt, 1e12), eta1, 3.0);
        assert!(((got - limit) / limit).abs() < 1e-6);
    }

    #[test]
    fn zero_power_is_certain_outage() {
        let st = SubcarrierStats::unit();
        assert_eq!(subcarrier_outage(&st, power(0.0, 5.0), 1.0).unwrap(), 1.0);
        assert_eq!(subcarrier_outage(&st, power(5.0, 0.0), 1.0).unwrap(), 1.0);
    }

    #[test]
    fn high_power_has_vanishing_outage() {
        let phi = subcarrier_outage(&SubcarrierStats::unit(), power(1e8, 1e8), 1.0).unwrap();
        assert!(phi < 1e-6 && phi > 0.0);
    }

    #[test]
    fn quiet_destination_limit() {
        let st = SubcarrierStats::new(1.3, 0.8, 2.0, 1e-12).unwrap();
        let pt = 7.0;
        let phi = subcarrier_outage(&st, power(pt, 3.0), 1.0).unwrap();
        let expect = 1.0 - (-st.eta1 / (st.mu1 * pt)).exp();
        assert!((phi - expect).abs() < 1e-6);
    }

    #[test]
    fn unit_example_value() {
        // 40-digit reference: 0.13570426707635051
        let phi = subcarrier_outage(&SubcarrierStats::unit(), power(10.0, 10.0), 1.0).unwrap();
        assert!((phi - 0.135_704_267_076_350_5).abs() < 1e-14);
    }

    #[test]
    fn unit_example_against_monte_carlo() {
        let st = SubcarrierStats::unit();
        let pw = power(10.0, 10.0);
        let phi = subcarrier_outage(&st, pw, 1.0).unwrap();
        let mc = monte_carlo_outage(&st, pw, 1.0, 10_000_000, 2024).unwrap();
        assert!(mc.agrees_with(phi, 3.0), "{mc:?} vs {phi}");
    }

    #[test]
    fn monte_carlo_contracts() {
        let st = SubcarrierStats::unit();
        let mc = monte_carlo_outage(&st, power(0.0, 10.0), 1.0, 10_000, 1).unwrap();
        assert_eq!(mc.p, 1.0);
        assert_eq!(mc.std_error, 0.0);
        let a = monte_carlo_outage(&st, power(3.0, 4.0), 1.0, 20_000, 9).unwrap();
        let b = monte_carlo_outage(&st, power(3.0, 4.0), 1.0, 20_000, 9).unwrap();
        assert_eq!(a, b);
        assert!(monte_carlo_outage(&st, power(3.0, 4.0), 1.0, 9_999, 9).is_err());
    }

    #[test]
    fn invalid_inputs_rejected() {
        let st = SubcarrierStats::unit();
        assert!(SubcarrierStats::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(SubcarrierStats::new(1.0, f64::NAN, 1.0, 1.0).is_err());
        assert!(SubcarrierPower::new(-1.0, 1.0).is_err());
        assert!(SubcarrierPower::new(1.0, f64::INFINITY).is_err());
        assert!(subcarrier_outage(&st, power(1.0, 1.0), 0.0).is_err());
        assert!(subcarrier_outage(&st, power(1.0, 1.0), -2.0).is_err());
    }

    #[test]
    fn block_and_average_examples() {
        assert_eq!(block_outage(&[0.0, 0.0]), 0.0);
        assert_eq!(block_outage(&[0.5, 0.5]), 0.75);
        let single = SapSet::from_saps(2, 2, vec![Sap::new(vec![1, 2], 2).unwrap()]).unwrap();
        assert_eq!(sap_averaged_outage(&[0.5, 0.5], &single).unwrap(), 0.75);
        let four = enumerate_saps(4, 2).unwrap();
        assert_eq!(sap_averaged_outage(&[0.0; 4], &four).unwrap(), 0.0);
        assert!(matches!(
            sap_averaged_outage(&[0.1; 3], &four),
            Err(Error::IndexOutOfRange { index: 4, available: 3 })
        ));
    }

    #[test]
    fn average_outage_query_validation() {
        let q = OutageQuery {
            s: 1.0,
            stats: vec![SubcarrierStats::unit(); 3],
            powers: vec![power(10.0, 10.0); 3],
            sap_set: enumerate_saps(4, 2).unwrap(),
        };
        assert!(matches!(average_outage(&q), Err(Error::IndexOutOfRange { .. })));
        let mut q2 = q.clone();
        q2.powers.pop();
        assert!(matches!(average_outage(&q2), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn outage_mode_round_trips_through_text() {
        for m in [OutageMode::SingleSap, OutageMode::SapAveraged] {
            assert_eq!(m.to_string().parse::<OutageMode>().unwrap(), m);
            let js = serde_json::to_string(&m).unwrap();
            assert_eq!(js, format!("\"{m}\""));
        }
        assert!("both".parse::<OutageMode>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn stats() -> impl Strategy<Value = SubcarrierStats> {
            (0.5f64..5.0, 0.5f64..5.0, 0.5f64..5.0, 0.5f64..5.0)
                .prop_map(|(a, b, c, d)| SubcarrierStats::new(a, b, c, d).unwrap())
        }

        proptest! {
            #[test]
            fn decreasing_in_powers(st in stats(), pt in 5.0f64..5000.0, pr in 5.0f64..5000.0, s in 0.2f64..5.0) {
                let base = subcarrier_outage(&st, power(pt, pr), s).unwrap();
                let more_pt = subcarrier_outage(&st, power(pt * 1.001, pr), s).unwrap();
                let more_pr = subcarrier_outage(&st, power(pt, pr * 1.001), s).unwrap();
                prop_assert!(more_pt < base);
                prop_assert!(more_pr < base);
            }

            #[test]
            fn monotone_in_stats_and_threshold(st in stats(), pt in 5.0f64..5000.0, pr in 5.0f64..5000.0, s in 0.2f64..5.0) {
                let f = 1.001;
                let base = subcarrier_outage(&st, power(pt, pr), s).unwrap();
                let at = |st: SubcarrierStats, s: f64| subcarrier_outage(&st, power(pt, pr), s).unwrap();
                let eta1_up = SubcarrierStats { eta1: st.eta1 * f, ..st };
                let eta2_up = SubcarrierStats { eta2: st.eta2 * f, ..st };
                let mu1_up = SubcarrierStats { mu1: st.mu1 * f, ..st };
                let mu2_up = SubcarrierStats { mu2: st.mu2 * f, ..st };
                prop_assert!(at(st, s * f) > base);
                prop_assert!(at(eta1_up, s) > base);
                prop_assert!(at(eta2_up, s) > base);
                prop_assert!(at(mu1_up, s) < base);
                prop_assert!(at(mu2_up, s) < base);
            }

            #[test]
            fn average_bounded_by_worst_sap(phis in proptest::collection::vec(0.0f64..1.0, 4)) {
                let set = enumerate_saps(4, 2).unwrap();
                let avg = sap_averaged_outage(&phis, &set).unwrap();
                let worst = set.iter()
                    .map(|sap| 1.0 - sap.indices().iter().map(|&i| 1.0 - phis[i - 1]).product::<f64>())
                    .fold(0.0, f64::max);
                prop_assert!((0.0..=1.0).contains(&avg));
                prop_assert!(avg <= worst + 1e-15);
            }

            #[test]
            fn k1_shape(x in 1e-6f64..30.0) {
                let k = bessel_k1(x).unwrap();
                let k_next = bessel_k1(x * 1.01).unwrap();
                prop_assert!(k_next < k);
                let xk = x * k;
                prop_assert!(xk > 0.0 && xk <= 1.0);
            }
        }
    }
}
