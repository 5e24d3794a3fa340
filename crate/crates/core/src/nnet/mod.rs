//! Minimal dense feed-forward networks with hand-written backpropagation.
//!
//! Weight matrices are stored input-major: row `i` holds the weights from
//! input unit `i` to every output unit. Both forward and backward passes work
//! on whole minibatches so each weight row is streamed once per batch.

mod adam;
mod gradcheck;
mod io;
mod train;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{gradient_check, relative_error};
pub(crate) use io::{network_raw as io_raw, NetworkIn as NetworkDoc};
pub use io::{read_network, write_network, NETWORK_FORMAT, NETWORK_VERSION};
pub use train::{train, train_learner, Learner, LrStep, TrainConfig};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower and upper clamp applied to probabilities before any logarithm.
pub const PROB_EPS: f64 = 1e-7;

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output `a = f(z)`.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if a > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// `inputs × outputs`, input-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
    pub dropout_after: bool,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation, dropout_after: bool) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            activation,
            dropout_after,
        }
    }

    /// He-normal weights (σ = sqrt(2 / fan_in)) and zero bias.
    pub fn init(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        dropout_after: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let normal = Normal::new(0.0, (2.0 / inputs as f64).sqrt()).expect("finite std");
        let mut layer = Self::zeros(inputs, outputs, activation, dropout_after);
        for w in &mut layer.weights {
            *w = normal.sample(rng);
        }
        layer
    }

    #[inline]
    pub fn row(&self, input: usize) -> &[f64] {
        &self.weights[input * self.outputs..(input + 1) * self.outputs]
    }

    /// Pre-activation `b + xW` for one input vector.
    pub fn affine(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.bias.clone();
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                axpy(&mut z, xi, self.row(i));
            }
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    pub layers: Vec<DenseLayer>,
}

/// Layer description used to build a freshly initialized network.
#[derive(Debug, Clone, Copy)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
    pub dropout_after: bool,
}

/// How dropout behaves during a forward pass.
pub enum Mode<'a> {
    Eval,
    Train { rng: &'a mut ChaCha8Rng, dropout_p: f64 },
}

/// Per-layer outputs of a forward pass over a batch.
///
/// `activations[l][b]` is layer `l`'s post-activation output for sample `b`
/// before dropout; `outputs[l][b]` is what the next layer consumes.
#[derive(Debug, Clone)]
pub struct ActivationTrace {
    pub activations: Vec<Vec<Vec<f64>>>,
    pub masks: Vec<Option<Vec<Vec<bool>>>>,
    pub outputs: Vec<Vec<Vec<f64>>>,
    dropout_scale: f64,
}

impl ActivationTrace {
    /// Output of the final layer for each sample.
    pub fn final_outputs(&self) -> &[Vec<f64>] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl DenseNetwork {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        let net = Self { layers };
        net.validate()?;
        Ok(net)
    }

    pub fn init(input_dim: usize, specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut rng = crate::seed::rng(seed);
        let mut inputs = input_dim;
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            layers.push(DenseLayer::init(
                inputs,
                spec.width,
                spec.activation,
                spec.dropout_after,
                &mut rng,
            ));
            inputs = spec.width;
        }
        Self::new(layers)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.layers.first().ok_or(Error::Empty("network"))?;
        let mut inputs = first.inputs;
        for layer in &self.layers {
            if layer.inputs != inputs {
                return Err(Error::shape(inputs, layer.inputs));
            }
            if layer.weights.len() != layer.inputs * layer.outputs {
                return Err(Error::shape(layer.inputs * layer.outputs, layer.weights.len()));
            }
            if layer.bias.len() != layer.outputs {
                return Err(Error::shape(layer.outputs, layer.bias.len()));
            }
            if layer.weights.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(Error::Model("non-finite parameter".into()));
            }
            inputs = layer.outputs;
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("validated network").outputs
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameter tensors in the order `w0, b0, w1, b1, …`.
    pub fn parameters(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn zero_gradients(&self) -> Vec<Vec<f64>> {
        self.parameters().iter().map(|p| vec![0.0; p.len()]).collect()
    }

    /// Forward pass for a single input.
    pub fn forward(&self, input: &[f64], mode: Mode<'_>) -> Result<ActivationTrace> {
        self.forward_batch(std::slice::from_ref(&input), mode)
    }

    /// Eval-mode output for a single input.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut trace = self.forward(input, Mode::Eval)?;
        Ok(trace.outputs.pop().and_then(|mut o| o.pop()).unwrap_or_default())
    }

    /// Eval-mode pre-activation of the final layer.
    pub fn logits(&self, input: &[f64]) -> Result<Vec<f64>> {
        let trace = self.forward(input, Mode::Eval)?;
        let last = self.layers.last().expect("validated network");
        Ok(match trace.outputs.len() {
            1 => last.affine(input),
            n => last.affine(&trace.outputs[n - 2][0]),
        })
    }

    pub fn forward_batch<X: AsRef<[f64]>>(&self, inputs: &[X], mode: Mode<'_>) -> Result<ActivationTrace> {
        let (mut rng, p) = match mode {
            Mode::Eval => (None, 0.0),
            Mode::Train { rng, dropout_p } => (Some(rng), dropout_p),
        };
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!("dropout probability {p} outside [0, 1)")));
        }
        let scale = 1.0 / (1.0 - p);
        let mut trace = ActivationTrace {
            activations: Vec::with_capacity(self.layers.len()),
            masks: Vec::with_capacity(self.layers.len()),
            outputs: Vec::with_capacity(self.layers.len()),
            dropout_scale: scale,
        };
        for x in inputs {
            if x.as_ref().len() != self.input_dim() {
                return Err(Error::shape(self.input_dim(), x.as_ref().len()));
            }
        }

        for (l, layer) in self.layers.iter().enumerate() {
            let mut acts: Vec<Vec<f64>> = vec![layer.bias.clone(); inputs.len()];
            for i in 0..layer.inputs {
                let row = layer.row(i);
                for (b, z) in acts.iter_mut().enumerate() {
                    let xi = if l == 0 {
                        inputs[b].as_ref()[i]
                    } else {
                        trace.outputs[l - 1][b][i]
                    };
                    if xi != 0.0 {
                        axpy(z, xi, row);
                    }
                }
            }
            for z in acts.iter_mut().flatten() {
                *z = layer.activation.apply(*z);
            }

            let drop = layer.dropout_after && p > 0.0;
            match rng.as_deref_mut() {
                Some(rng) if drop => {
                    let mut masks = Vec::with_capacity(acts.len());
                    let mut outs = Vec::with_capacity(acts.len());
                    for a in &acts {
                        let keep: Vec<bool> = (0..a.len()).map(|_| rng.random::<f64>() >= p).collect();
                        outs.push(
                            a.iter()
                                .zip(&keep)
                                .map(|(&v, &k)| if k { v * scale } else { 0.0 })
                                .collect(),
                        );
                        masks.push(keep);
                    }
                    trace.masks.push(Some(masks));
                    trace.outputs.push(outs);
                }
                _ => {
                    trace.masks.push(None);
                    trace.outputs.push(acts.clone());
                }
            }
            trace.activations.push(acts);
        }
        Ok(trace)
    }

    /// Accumulates into `grads` the gradient of the batch-mean loss given
    /// `output_delta[b]`, the derivative of that mean loss with respect to
    /// the final layer's pre-activation for sample `b`.
    pub fn backward<X: AsRef<[f64]>>(
        &self,
        inputs: &[X],
        trace: &ActivationTrace,
        output_delta: Vec<Vec<f64>>,
        grads: &mut [Vec<f64>],
    ) {
        let mut delta = output_delta;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let (gw, rest) = grads[2 * l..].split_at_mut(1);
            let (gw, gb) = (&mut gw[0], &mut rest[0]);
            for d in &delta {
                for (g, &v) in gb.iter_mut().zip(d) {
                    *g += v;
                }
            }
            let input_of = |b: usize| -> &[f64] {
                if l == 0 {
                    inputs[b].as_ref()
                } else {
                    &trace.outputs[l - 1][b]
                }
            };
            for i in 0..layer.inputs {
                let grow = &mut gw[i * layer.outputs..(i + 1) * layer.outputs];
                for (b, d) in delta.iter().enumerate() {
                    let xi = input_of(b)[i];
                    if xi != 0.0 {
                        axpy(grow, xi, d);
                    }
                }
            }
            if l == 0 {
                break;
            }

            // Propagate to the previous layer's pre-activation.
            let prev = &self.layers[l - 1];
            let prev_acts = &trace.activations[l - 1];
            let prev_masks = trace.masks[l - 1].as_ref();
            let mut next = vec![vec![0.0; layer.inputs]; delta.len()];
            for (b, d) in delta.iter().enumerate() {
                for i in 0..layer.inputs {
                    let gate = match prev_masks {
                        Some(m) if !m[b][i] => continue,
                        Some(_) => trace.dropout_scale,
                        None => 1.0,
                    };
                    let fprime = prev.activation.derivative_from_output(prev_acts[b][i]);
                    if fprime == 0.0 {
                        continue;
                    }
                    next[b][i] = gate * fprime * dot(layer.row(i), d);
                }
            }
            delta = next;
        }
    }
}

/// `y += a·x`
#[inline]
pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with four interleaved accumulators, summed in a fixed order.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let k = c * 4;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in chunks * 4..n {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Mean binary cross-entropy with predictions clamped to `[1e-7, 1 − 1e-7]`.
pub fn bce_loss(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::shape(targets.len(), predictions.len()));
    }
    if predictions.is_empty() {
        return Err(Error::Empty("prediction vector"));
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(&p, &t)| {
            let p = clamp_prob(p);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    Ok(sum / predictions.len() as f64)
}

const DELTA_FLOOR: f64 = 1e-100;

pub(crate) fn flush(d: f64) -> f64 {
    if d.abs() < DELTA_FLOOR {
        0.0
    } else {
        d
    }
}

/// Derivative of the per-sample mean BCE with respect to the final layer's
/// pre-activation, divided by `batch` to match a batch-mean loss.
///
/// Sigmoid outputs use the fused `(p − t)/D` form, which never vanishes when
/// the prediction saturates on the wrong side. Other activations follow the
/// clamped loss literally. Deltas below `DELTA_FLOOR` in magnitude are
/// flushed to zero so saturated outputs never feed subnormals into the
/// backward pass.
pub(crate) fn bce_output_delta(activation: Activation, outputs: &[f64], targets: &[f64], batch: usize) -> Vec<f64> {
    let scale = 1.0 / (outputs.len() as f64 * batch as f64);
    outputs
        .iter()
        .zip(targets)
        .map(|(&p, &t)| match activation {
            Activation::Sigmoid => flush((p - t) * scale),
            other => {
                if !(PROB_EPS..=1.0 - PROB_EPS).contains(&p) {
                    0.0
                } else {
                    let dp = (p - t) / (p * (1.0 - p));
                    flush(dp * other.derivative_from_output(p) * scale)
                }
            }
        })
        .collect()
}
