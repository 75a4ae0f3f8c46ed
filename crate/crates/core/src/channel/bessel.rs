//! Modified Bessel function of the second kind, order one.
//!
//! Two regimes, switching at `x = 2`:
//!
//! * `x <= 2`: the ascending series
//!   `K1(x) = 1/x + ln(x/2) I1(x) - (x/4) Σ (ψ(k+1) + ψ(k+2)) (x²/4)^k / (k! (k+1)!)`.
//! * `x > 2`: Steed's continued fraction (CF2) for the exponentially scaled
//!   `e^x K1(x)`, which stays finite long after `K1` itself underflows.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SWITCH: f64 = 2.0;
const MAX_ITER: usize = 10_000;

/// `K1(x)` for `x > 0`.
pub fn bessel_k1(x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(k1_unchecked(x))
}

/// `e^x K1(x)` for `x > 0`.
pub fn bessel_k1_scaled(x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(k1_scaled_unchecked(x))
}

fn check_arg(x: f64) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::Domain(format!("K1 is defined for finite x > 0, got {x}")));
    }
    Ok(())
}

pub(crate) fn k1_unchecked(x: f64) -> f64 {
    if x <= SWITCH {
        let (i1, s) = series_parts(x);
        1.0 / x + (0.5 * x).ln() * i1 - 0.25 * x * s
    } else {
        k1_scaled_cf2(x) * (-x).exp()
    }
}

pub(crate) fn k1_scaled_unchecked(x: f64) -> f64 {
    if x <= SWITCH {
        k1_unchecked(x) * x.exp()
    } else {
        k1_scaled_cf2(x)
    }
}

/// `1 - x K1(x)` without the cancellation of forming `x K1(x)` first.
///
/// Tends to zero like `-(x²/2) ln(x)` as `x -> 0`; positive for every `x > 0`.
pub(crate) fn one_minus_x_k1(x: f64) -> f64 {
    if x <= SWITCH {
        let (i1, s) = series_parts(x);
        -x * (0.5 * x).ln() * i1 + 0.25 * x * x * s
    } else {
        1.0 - x * k1_scaled_cf2(x) * (-x).exp()
    }
}

/// Returns `(I1(x), S(x))` where `S` is the digamma-weighted sum of the
/// ascending series.
fn series_parts(x: f64) -> (f64, f64) {
    let y = 0.25 * x * x;
    // term_k = y^k / (k! (k+1)!)
    let mut term = 1.0;
    let mut h_k = 0.0; // harmonic number H_k
    let mut i1_sum = 0.0;
    let mut s_sum = 0.0;
    for k in 0..MAX_ITER {
        let h_k1 = h_k + 1.0 / (k as f64 + 1.0);
        let psi_sum = -2.0 * EULER_GAMMA + h_k + h_k1;
        i1_sum += term;
        s_sum += psi_sum * term;
        term *= y / ((k as f64 + 1.0) * (k as f64 + 2.0));
        h_k = h_k1;
        if term < 1e-18 * i1_sum {
            break;
        }
    }
    (0.5 * x * i1_sum, s_sum)
}

/// Steed's method for `K0` and `K1`, returning `e^x K1(x)`. Converges for
/// `x >= 2` in a few dozen iterations.
fn k1_scaled_cf2(x: f64) -> f64 {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    h *= a1;
    let k0_scaled = (std::f64::consts::PI / (2.0 * x)).sqrt() / s;
    k0_scaled * (x + 0.5 - h) / x
}
