use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{adam_step, bce_output_delta, AdamState, DenseNetwork, Mode};
use crate::error::{Error, Result};

/// Divide the learning rate by `divisor` from `iteration` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrStep {
    pub iteration: usize,
    pub divisor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_schedule: Vec<LrStep>,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub weight_decay: f64,
    pub dropout_p: f64,
    /// Standard deviation of Gaussian jitter added to inputs at train time.
    pub input_jitter: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::estimator()
    }
}

impl TrainConfig {
    /// Attribute estimator recipe at desk scale: 20 000 iterations, lr 1e-4
    /// divided by 10 after 70% of training.
    pub fn estimator() -> Self {
        Self::estimator_scaled(20_000)
    }

    pub fn estimator_scaled(iterations: usize) -> Self {
        Self {
            iterations,
            batch_size: 10,
            lr: 1e-4,
            lr_schedule: vec![LrStep {
                iteration: iterations * 7 / 10,
                divisor: 10.0,
            }],
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            weight_decay: 5e-5,
            dropout_p: 0.5,
            input_jitter: 0.0,
            seed: 0,
        }
    }

    /// Metaclassifier recipe: 25 000 iterations, lr 1e-2 divided by 10 at
    /// 10 000, 15 000 and 20 000, dropout 0.5 after hidden layers.
    pub fn metaclassifier() -> Self {
        Self {
            iterations: 25_000,
            batch_size: 10,
            lr: 1e-2,
            lr_schedule: [10_000, 15_000, 20_000]
                .into_iter()
                .map(|iteration| LrStep {
                    iteration,
                    divisor: 10.0,
                })
                .collect(),
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            weight_decay: 5e-4,
            dropout_p: 0.5,
            input_jitter: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be a nonnegative real");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(0.0..).contains(&self.weight_decay) || !(0.0..).contains(&self.input_jitter) {
            return bad("weight_decay and input_jitter must be nonnegative");
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad("dropout_p must lie in [0, 1)");
        }
        let mut last = None;
        for step in &self.lr_schedule {
            if last.is_some_and(|l| step.iteration <= l) || step.iteration > self.iterations {
                return bad("lr_schedule iterations must be strictly increasing and ≤ iterations");
            }
            if step.divisor.is_nan() || step.divisor <= 0.0 {
                return bad("lr_schedule divisors must be positive");
            }
            last = Some(step.iteration);
        }
        Ok(())
    }

    pub fn lr_at(&self, iteration: usize) -> f64 {
        self.lr_schedule
            .iter()
            .filter(|s| iteration >= s.iteration)
            .fold(self.lr, |lr, s| lr / s.divisor)
    }
}

/// Something that can be optimized with minibatch Adam.
pub trait Learner {
    fn parameters(&self) -> Vec<&[f64]>;
    fn parameters_mut(&mut self) -> Vec<&mut [f64]>;
    /// Mean loss over `batch`; `grads` (zeroed by the caller) receives the
    /// gradient of that mean.
    fn batch_gradient(&self, batch: &[usize], rng: &mut ChaCha8Rng, grads: &mut [Vec<f64>]) -> f64;
}

/// Runs `config.iterations` Adam steps over minibatches drawn from `n`
/// samples by seeded epoch-wise shuffling. Returns the mean loss of every
/// block of 100 iterations (the last block may be shorter).
pub fn train_learner<L: Learner>(learner: &mut L, n: usize, config: &TrainConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if n == 0 {
        return Err(Error::Empty("training set"));
    }
    let mut rng = crate::seed::rng(config.seed);
    let shapes: Vec<usize> = learner.parameters().iter().map(|p| p.len()).collect();
    let mut state = AdamState::zeros(&shapes);
    let mut grads: Vec<Vec<f64>> = shapes.iter().map(|&s| vec![0.0; s]).collect();

    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n;
    let mut batch = Vec::with_capacity(config.batch_size);
    let mut trace = Vec::with_capacity(config.iterations / 100 + 1);
    let mut block = (0.0, 0usize);

    for iteration in 0..config.iterations {
        batch.clear();
        while batch.len() < config.batch_size {
            if cursor == n {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }
        for g in &mut grads {
            g.fill(0.0);
        }
        let loss = learner.batch_gradient(&batch, &mut rng, &mut grads);
        adam_step(learner.parameters_mut(), &grads, &mut state, config, iteration);

        block.0 += loss;
        block.1 += 1;
        if block.1 == 100 {
            trace.push(block.0 / 100.0);
            block = (0.0, 0);
        }
    }
    if block.1 > 0 {
        trace.push(block.0 / block.1 as f64);
    }
    Ok(trace)
}

/// A dense network paired with a supervised BCE dataset.
pub(crate) struct Supervised<'a, X: AsRef<[f64]>, T: AsRef<[f64]>> {
    pub net: &'a mut DenseNetwork,
    pub inputs: &'a [X],
    pub targets: &'a [T],
    pub dropout_p: f64,
    pub jitter: Option<Normal<f64>>,
}

impl<X: AsRef<[f64]>, T: AsRef<[f64]>> Learner for Supervised<'_, X, T> {
    fn parameters(&self) -> Vec<&[f64]> {
        self.net.parameters()
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.net.parameters_mut()
    }

    fn batch_gradient(&self, batch: &[usize], rng: &mut ChaCha8Rng, grads: &mut [Vec<f64>]) -> f64 {
        let inputs: Vec<Vec<f64>> = batch
            .iter()
            .map(|&i| {
                let x = self.inputs[i].as_ref();
                match &self.jitter {
                    Some(normal) => x.iter().map(|&v| v + normal.sample(rng)).collect(),
                    None => x.to_vec(),
                }
            })
            .collect();
        let trace = self
            .net
            .forward_batch(
                &inputs,
                Mode::Train {
                    rng,
                    dropout_p: self.dropout_p,
                },
            )
            .expect("training inputs validated up front");
        let activation = self.net.layers.last().expect("nonempty").activation;
        let mut loss = 0.0;
        let deltas = trace
            .final_outputs()
            .iter()
            .zip(batch)
            .map(|(out, &i)| {
                let t = self.targets[i].as_ref();
                loss += super::bce_loss(out, t).expect("targets validated up front");
                bce_output_delta(activation, out, t, batch.len())
            })
            .collect();
        self.net.backward(&inputs, &trace, deltas, grads);
        loss / batch.len() as f64
    }
}

/// Trains `net` in place with BCE against `targets`; returns the loss trace.
pub fn train<X: AsRef<[f64]>, T: AsRef<[f64]>>(
    net: &mut DenseNetwork,
    inputs: &[X],
    targets: &[T],
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    if inputs.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if inputs.len() != targets.len() {
        return Err(Error::shape(inputs.len(), targets.len()));
    }
    for (x, t) in inputs.iter().zip(targets) {
        if x.as_ref().len() != net.input_dim() {
            return Err(Error::shape(net.input_dim(), x.as_ref().len()));
        }
        if t.as_ref().len() != net.output_dim() {
            return Err(Error::shape(net.output_dim(), t.as_ref().len()));
        }
    }
    let jitter = (config.input_jitter > 0.0).then(|| Normal::new(0.0, config.input_jitter).expect("validated jitter"));
    let mut learner = Supervised {
        net,
        inputs,
        targets,
        dropout_p: config.dropout_p,
        jitter,
    };
    train_learner(&mut learner, inputs.len(), config)
}
