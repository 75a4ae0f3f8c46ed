use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, MlpParams};
use crate::error::{Error, Result};

/// Adam hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { step_size: 1e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::invalid(format!("step size must be positive, got {}", self.step_size)));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Moment accumulators and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, param_count: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, m: vec![0.0; param_count], v: vec![0.0; param_count], t: 0 })
    }

    pub fn for_params(config: AdamConfig, params: &MlpParams) -> Result<Self> {
        Self::new(config, params.param_count())
    }
}

/// One Adam update:
///
/// ```text
/// t ← t + 1
/// m ← β1 m + (1 − β1) g
/// v ← β2 v + (1 − β2) g²
/// θ ← θ − Δ m̂ / (√v̂ + ε),   m̂ = m / (1 − β1^t),  v̂ = v / (1 − β2^t)
/// ```
pub fn adam_step(state: &mut AdamState, params: &mut MlpParams, grads: &Gradients) -> Result<()> {
    adam_update(state, params.as_flat_mut(), &grads.values)
}

/// [`adam_step`] on a bare parameter slice.
pub fn adam_update(state: &mut AdamState, theta: &mut [f64], grads: &[f64]) -> Result<()> {
    let n = theta.len();
    for (len, ctx) in [(grads.len(), "gradient"), (state.m.len(), "first moment"), (state.v.len(), "second moment")] {
        if len != n {
            return Err(Error::ShapeMismatch { expected: n, actual: len, context: ctx });
        }
    }
    let AdamConfig { step_size, beta1, beta2, epsilon } = state.config;
    state.t += 1;
    let t = i32::try_from(state.t).unwrap_or(i32::MAX);
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for (((th, &g), m), v) in theta.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *th -= step_size * m_hat / (v_hat.sqrt() + epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(config: AdamConfig) -> AdamState {
        AdamState::new(config, 1).unwrap()
    }

    #[test]
    fn quadratic_trace() {
        // f(θ) = θ², θ0 = 1, Δ = 0.1; traced step by step beforehand.
        let table = [0.900_000_000_5, 0.800_412_228_691_792_8, 0.701_586_272_946_030_3];
        let mut st = scalar(AdamConfig { step_size: 0.1, ..AdamConfig::default() });
        let mut theta = [1.0];
        for expect in table {
            let g = [2.0 * theta[0]];
            adam_update(&mut st, &mut theta, &g).unwrap();
            assert!((theta[0] - expect).abs() < 1e-12, "{} vs {expect}", theta[0]);
        }
        assert_eq!(st.t, 3);
    }

    #[test]
    fn first_step_moves_by_step_size() {
        for g in [1e-3, -0.7, 42.0, -1e4] {
            let mut st = scalar(AdamConfig::default());
            let mut theta = [0.3];
            adam_update(&mut st, &mut theta, &[g]).unwrap();
            let moved = theta[0] - 0.3;
            assert_eq!(moved.signum(), -g.signum());
            let d = st.config.step_size;
            assert!(moved.abs() <= d && moved.abs() >= d * (1.0 - 1e-4));
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut st = AdamState::new(AdamConfig::default(), 3).unwrap();
        let mut theta = [0.1, -2.0, 7.0];
        adam_update(&mut st, &mut theta, &[0.0; 3]).unwrap();
        assert_eq!(theta, [0.1, -2.0, 7.0]);
        assert!(st.v.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn rejects_bad_config_and_shapes() {
        assert!(AdamState::new(AdamConfig { beta1: 1.0, ..Default::default() }, 1).is_err());
        assert!(AdamState::new(AdamConfig { beta2: -0.1, ..Default::default() }, 1).is_err());
        assert!(AdamState::new(AdamConfig { step_size: 0.0, ..Default::default() }, 1).is_err());
        let mut st = AdamState::new(AdamConfig::default(), 2).unwrap();
        assert!(adam_update(&mut st, &mut [0.0; 2], &[0.0; 3]).is_err());
    }
}
