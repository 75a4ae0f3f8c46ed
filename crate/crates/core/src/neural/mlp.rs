use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Beyond this magnitude the logistic function is evaluated by its
/// asymptote.
const SIGMOID_SATURATION: f64 = 40.0;

/// Logistic function, evaluated without overflow.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z > SIGMOID_SATURATION {
        1.0
    } else if z < -SIGMOID_SATURATION {
        z.exp()
    } else if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Weights and biases of a fully connected sigmoid network.
///
/// All parameters live in one flat buffer. Layer `l` holds its weight matrix
/// (`dims[l + 1]` rows by `dims[l]` columns, row-major) followed by its bias
/// vector when biases are enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layer_dims: Vec<usize>,
    use_bias: bool,
    values: Vec<f64>,
    offsets: Vec<usize>,
}

fn layout(layer_dims: &[usize], use_bias: bool) -> Result<(Vec<usize>, usize)> {
    if layer_dims.len() < 2 {
        return Err(Error::invalid(format!("need at least input and output widths, got {layer_dims:?}")));
    }
    if layer_dims.contains(&0) {
        return Err(Error::invalid(format!("layer widths must be positive, got {layer_dims:?}")));
    }
    let mut offsets = Vec::with_capacity(layer_dims.len() - 1);
    let mut next = 0;
    for w in layer_dims.windows(2) {
        offsets.push(next);
        next += w[0] * w[1] + if use_bias { w[1] } else { 0 };
    }
    Ok((offsets, next))
}

impl MlpParams {
    /// All parameters zero.
    pub fn zeros(layer_dims: &[usize], use_bias: bool) -> Result<Self> {
        let (offsets, count) = layout(layer_dims, use_bias)?;
        Ok(Self { layer_dims: layer_dims.to_vec(), use_bias, values: vec![0.0; count], offsets })
    }

    /// Rebuilds parameters from a flat buffer in the documented layout.
    pub fn from_flat(layer_dims: &[usize], use_bias: bool, values: Vec<f64>) -> Result<Self> {
        let (offsets, count) = layout(layer_dims, use_bias)?;
        if values.len() != count {
            return Err(Error::ShapeMismatch {
                expected: count,
                actual: values.len(),
                context: "flat parameter buffer",
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("parameters must be finite"));
        }
        Ok(Self { layer_dims: layer_dims.to_vec(), use_bias, values, offsets })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn use_bias(&self) -> bool {
        self.use_bias
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.values.len()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub(crate) fn offset(&self, layer: usize) -> usize {
        self.offsets[layer]
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        let (rows, cols) = (self.layer_dims[layer + 1], self.layer_dims[layer]);
        let o = self.offsets[layer];
        &self.values[o..o + rows * cols]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let (rows, cols) = (self.layer_dims[layer + 1], self.layer_dims[layer]);
        let o = self.offsets[layer];
        &mut self.values[o..o + rows * cols]
    }

    /// Empty when biases are disabled.
    pub fn biases(&self, layer: usize) -> &[f64] {
        if !self.use_bias {
            return &[];
        }
        let (rows, cols) = (self.layer_dims[layer + 1], self.layer_dims[layer]);
        let o = self.offsets[layer] + rows * cols;
        &self.values[o..o + rows]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        if !self.use_bias {
            return &mut [];
        }
        let (rows, cols) = (self.layer_dims[layer + 1], self.layer_dims[layer]);
        let o = self.offsets[layer] + rows * cols;
        &mut self.values[o..o + rows]
    }
}

/// Uniform `[-1/√fan_in, 1/√fan_in]` weights, zero biases.
pub fn init_mlp(layer_dims: &[usize], seed: u64, use_bias: bool) -> Result<MlpParams> {
    let mut params = MlpParams::zeros(layer_dims, use_bias)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in 0..params.num_layers() {
        let bound = 1.0 / (params.layer_dims[layer] as f64).sqrt();
        for w in params.weights_mut(layer) {
            *w = rng.random_range(-bound..=bound);
        }
    }
    Ok(params)
}

/// Multiply-accumulates plus activations of one forward pass:
/// `Σ_r (ρ_r ρ_{r+1} + ρ_{r+1})`.
pub fn flop_count(layer_dims: &[usize]) -> Result<u64> {
    layout(layer_dims, false)?;
    Ok(layer_dims.windows(2).map(|w| (w[0] * w[1] + w[1]) as u64).sum())
}

/// Operation tally filled in by [`forward_counted`].
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCounter {
    pub multiply_accumulates: u64,
    pub activations: u64,
}

impl OpCounter {
    pub fn total(&self) -> u64 {
        self.multiply_accumulates + self.activations
    }
}

fn check_input(params: &MlpParams, input: &[f64]) -> Result<()> {
    if input.len() != params.input_dim() {
        return Err(Error::ShapeMismatch {
            expected: params.input_dim(),
            actual: input.len(),
            context: "network input",
        });
    }
    Ok(())
}

/// Network output for one input vector.
pub fn forward(params: &MlpParams, input: &[f64]) -> Result<Vec<f64>> {
    check_input(params, input)?;
    let mut ws = Workspace::new(params);
    ws.forward(params, input, None);
    Ok(ws.output().to_vec())
}

/// [`forward`] that also tallies the arithmetic it performs.
pub fn forward_counted(params: &MlpParams, input: &[f64], counter: &mut OpCounter) -> Result<Vec<f64>> {
    check_input(params, input)?;
    let mut ws = Workspace::new(params);
    ws.forward(params, input, Some(counter));
    Ok(ws.output().to_vec())
}

/// Activation buffers reused across samples.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    pub fn new(params: &MlpParams) -> Self {
        Self {
            acts: params.layer_dims.iter().map(|&d| vec![0.0; d]).collect(),
            deltas: params.layer_dims.iter().map(|&d| vec![0.0; d]).collect(),
        }
    }

    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }

    pub fn forward(&mut self, params: &MlpParams, input: &[f64], mut counter: Option<&mut OpCounter>) {
        self.acts[0].copy_from_slice(input);
        for layer in 0..params.num_layers() {
            let w = params.weights(layer);
            let b = params.biases(layer);
            let cols = params.layer_dims[layer];
            let (prev, rest) = self.acts.split_at_mut(layer + 1);
            let x = &prev[layer];
            let out = &mut rest[0];
            for (r, o) in out.iter_mut().enumerate() {
                let row = &w[r * cols..(r + 1) * cols];
                let mut z = if b.is_empty() { 0.0 } else { b[r] };
                for (wi, xi) in row.iter().zip(x) {
                    z += wi * xi;
                }
                *o = sigmoid(z);
            }
            if let Some(c) = counter.as_deref_mut() {
                c.multiply_accumulates += (out.len() * cols) as u64;
                c.activations += out.len() as u64;
            }
        }
    }

    /// Adds `scale * ∂||out - target||² / ∂θ` of the last forward pass into
    /// `grad`; returns the squared error.
    pub fn backward(&mut self, params: &MlpParams, target: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        let last = params.num_layers();
        let mut sq = 0.0;
        {
            let out = &self.acts[last];
            let d = &mut self.deltas[last];
            for ((di, &o), &y) in d.iter_mut().zip(out).zip(target) {
                let e = o - y;
                sq += e * e;
                *di = scale * 2.0 * e * o * (1.0 - o);
            }
        }
        for layer in (0..last).rev() {
            let cols = params.layer_dims[layer];
            let rows = params.layer_dims[layer + 1];
            let o = params.offset(layer);
            let w = params.weights(layer);
            let (lower, upper) = self.deltas.split_at_mut(layer + 1);
            let delta = &upper[0];
            let x = &self.acts[layer];
            let gw = &mut grad[o..o + rows * cols];
            for r in 0..rows {
                let dr = delta[r];
                if dr == 0.0 {
                    continue;
                }
                for (g, xi) in gw[r * cols..(r + 1) * cols].iter_mut().zip(x) {
                    *g += dr * xi;
                }
            }
            if params.use_bias {
                let gb = &mut grad[o + rows * cols..o + rows * cols + rows];
                for (g, d) in gb.iter_mut().zip(delta) {
                    *g += d;
                }
            }
            if layer > 0 {
                let prev = &mut lower[layer];
                prev.iter_mut().for_each(|p| *p = 0.0);
                for r in 0..rows {
                    let dr = delta[r];
                    for (p, wi) in prev.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
                        *p += dr * wi;
                    }
                }
                for (p, a) in prev.iter_mut().zip(x) {
                    *p *= a * (1.0 - a);
                }
            }
        }
        sq
    }
}

/// Inputs and targets of one mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

impl Batch {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::invalid("a batch needs at least one sample"));
        }
        if inputs.len() != targets.len() {
            return Err(Error::ShapeMismatch {
                expected: inputs.len(),
                actual: targets.len(),
                context: "targets per batch",
            });
        }
        let all = inputs.iter().chain(&targets).flatten();
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::invalid("batch entries must be finite"));
        }
        for (dims, ctx) in [(&inputs, "input width"), (&targets, "target width")] {
            let w = dims[0].len();
            if let Some(bad) = dims.iter().find(|v| v.len() != w) {
                return Err(Error::ShapeMismatch { expected: w, actual: bad.len(), context: ctx });
            }
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    fn check(&self, params: &MlpParams) -> Result<()> {
        check_input(params, &self.inputs[0])?;
        if self.targets[0].len() != params.output_dim() {
            return Err(Error::ShapeMismatch {
                expected: params.output_dim(),
                actual: self.targets[0].len(),
                context: "network target",
            });
        }
        Ok(())
    }
}

/// `(1/D) Σ_d ||target_d - output_d||²`.
pub fn mse_loss(params: &MlpParams, batch: &Batch) -> Result<f64> {
    batch.check(params)?;
    let mut ws = Workspace::new(params);
    let mut total = 0.0;
    for (x, y) in batch.inputs.iter().zip(&batch.targets) {
        ws.forward(params, x, None);
        total += ws.output().iter().zip(y).map(|(o, t)| (t - o) * (t - o)).sum::<f64>();
    }
    Ok(total / batch.len() as f64)
}

/// Gradient of [`mse_loss`] with respect to every parameter, same layout
/// as [`MlpParams::as_flat`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub values: Vec<f64>,
}

pub fn gradients(params: &MlpParams, batch: &Batch) -> Result<Gradients> {
    batch.check(params)?;
    let mut ws = Workspace::new(params);
    let mut values = vec![0.0; params.param_count()];
    let scale = 1.0 / batch.len() as f64;
    for (x, y) in batch.inputs.iter().zip(&batch.targets) {
        ws.forward(params, x, None);
        ws.backward(params, y, scale, &mut values);
    }
    Ok(Gradients { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_batch(rng: &mut ChaCha8Rng, d: usize, input: usize, output: usize) -> Batch {
        let inputs = (0..d).map(|_| (0..input).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let targets = (0..d).map(|_| (0..output).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        Batch::new(inputs, targets).unwrap()
    }

    #[test]
    fn zero_network_outputs_half() {
        let p = MlpParams::zeros(&[8, 5, 4], true).unwrap();
        assert_eq!(forward(&p, &[0.3; 8]).unwrap(), vec![0.5; 4]);
    }

    #[test]
    fn hand_computed_single_layer() {
        let mut p = MlpParams::zeros(&[2, 2], false).unwrap();
        p.weights_mut(0).copy_from_slice(&[0.5, -1.0, 2.0, 0.25]);
        let out = forward(&p, &[1.0, 2.0]).unwrap();
        // rows: 0.5 - 2 = -1.5 and 2 + 0.5 = 2.5
        let expect = [1.0 / (1.0 + 1.5f64.exp()), 1.0 / (1.0 + (-2.5f64).exp())];
        assert!((out[0] - expect[0]).abs() < 1e-15);
        assert!((out[1] - expect[1]).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(1e6), 1.0);
        assert!(sigmoid(-1e6) >= 0.0);
        assert!(sigmoid(-39.0) > 0.0);
        for z in [-45.0, -40.5, -20.0, -1.0, 3.0, 39.9] {
            let exact = 1.0 / (1.0 + f64::exp(-z));
            assert!((sigmoid(z) - exact).abs() <= 1e-17 + 1e-15 * exact);
        }
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = init_mlp(&[4, 7, 3], 5, true).unwrap();
        let b = init_mlp(&[4, 7, 3], 5, true).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_mlp(&[4, 7, 3], 6, true).unwrap());
        assert!(a.weights(0).iter().all(|w| w.abs() <= 0.5));
        assert!(a.biases(0).iter().all(|&b| b == 0.0));
        assert!(init_mlp(&[4], 0, true).is_err());
        assert!(init_mlp(&[4, 0, 2], 0, true).is_err());
    }

    #[test]
    fn paper_architecture_parameter_count() {
        let dims = [8, 128, 128, 128, 128, 128, 128, 4];
        let p = init_mlp(&dims, 0, false).unwrap();
        assert_eq!(p.param_count(), 8 * 128 + 5 * 128 * 128 + 128 * 4);
        let pb = init_mlp(&dims, 0, true).unwrap();
        assert_eq!(pb.param_count(), p.param_count() + 6 * 128 + 4);
    }

    #[test]
    fn flop_counts() {
        assert_eq!(flop_count(&[8, 128, 128, 4]).unwrap(), 8 * 128 + 128 * 128 + 128 * 4 + (128 + 128 + 4));
        assert_eq!(flop_count(&[5, 3]).unwrap(), 5 * 3 + 3);
        let dominant = |dims: &[usize]| dims.windows(2).map(|w| (w[0] * w[1]) as u64).sum::<u64>();
        let hidden = |w: usize| -> Vec<usize> { vec![w, w, w] };
        assert_eq!(dominant(&hidden(64)) * 4, dominant(&hidden(128)));
        let mut counter = OpCounter::default();
        let p = init_mlp(&[8, 16, 9, 4], 1, true).unwrap();
        forward_counted(&p, &[0.1; 8], &mut counter).unwrap();
        assert_eq!(counter.total(), flop_count(&[8, 16, 9, 4]).unwrap());
    }

    #[test]
    fn loss_examples() {
        let p = MlpParams::zeros(&[3, 4], true).unwrap();
        let same = Batch::new(vec![vec![0.2, 0.1, 0.9]], vec![vec![0.5; 4]]).unwrap();
        assert_eq!(mse_loss(&p, &same).unwrap(), 0.0);
        assert!(gradients(&p, &same).unwrap().values.iter().all(|&g| g == 0.0));
        let c = 0.125;
        let shifted = Batch::new(vec![vec![0.2, 0.1, 0.9]], vec![vec![0.5 + c; 4]]).unwrap();
        assert!((mse_loss(&p, &shifted).unwrap() - 4.0 * c * c).abs() < 1e-15);
    }

    #[test]
    fn loss_matches_reordered_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = init_mlp(&[6, 5, 3], 4, true).unwrap();
        let batch = random_batch(&mut rng, 7, 6, 3);
        let mut sq = Vec::new();
        for (x, y) in batch.inputs().iter().zip(batch.targets()).rev() {
            let out = forward(&p, x).unwrap();
            for k in (0..3).rev() {
                sq.push((y[k] - out[k]).powi(2));
            }
        }
        let reordered = sq.iter().rev().sum::<f64>() / 7.0;
        assert!((mse_loss(&p, &batch).unwrap() - reordered).abs() < 1e-12);
    }

    #[test]
    fn duplicated_batch_has_same_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = init_mlp(&[4, 6, 2], 9, true).unwrap();
        let b = random_batch(&mut rng, 5, 4, 2);
        let doubled = Batch::new(
            b.inputs().iter().chain(b.inputs()).cloned().collect(),
            b.targets().iter().chain(b.targets()).cloned().collect(),
        )
        .unwrap();
        let g1 = gradients(&p, &b).unwrap();
        let g2 = gradients(&p, &doubled).unwrap();
        for (a, b) in g1.values.iter().zip(&g2.values) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_errors() {
        let p = init_mlp(&[4, 3, 2], 0, true).unwrap();
        assert!(matches!(forward(&p, &[0.0; 3]), Err(Error::ShapeMismatch { .. })));
        let bad = Batch::new(vec![vec![0.0; 4]], vec![vec![0.0; 3]]).unwrap();
        assert!(mse_loss(&p, &bad).is_err());
        assert!(gradients(&p, &bad).is_err());
        assert!(Batch::new(vec![], vec![]).is_err());
        assert!(Batch::new(vec![vec![f64::NAN]], vec![vec![0.0]]).is_err());
        assert!(MlpParams::from_flat(&[2, 2], true, vec![0.0; 5]).is_err());
    }

    #[test]
    fn repeated_calls_are_bitwise_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = init_mlp(&[5, 8, 3], 1, true).unwrap();
        let b = random_batch(&mut rng, 4, 5, 3);
        assert_eq!(mse_loss(&p, &b).unwrap().to_bits(), mse_loss(&p, &b).unwrap().to_bits());
        assert_eq!(gradients(&p, &b).unwrap(), gradients(&p, &b).unwrap());
    }
}
