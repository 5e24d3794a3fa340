//! Attribute estimator: a dense network from feature vectors to PHOC
//! attribute probabilities.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::datagen::Sample;
use crate::error::{Error, Result};
use crate::nnet::{self, Activation, DenseNetwork, LayerSpec, Mode, TrainConfig};
use crate::phoc::{build_phoc, PhocConfig};

pub const ESTIMATOR_FORMAT: &str = "wordspot-estimator";
pub const ESTIMATOR_VERSION: u32 = 1;

/// Sigmoid outputs `â ∈ (0,1)^D`, clamped to `[1e-7, 1 − 1e-7]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeEstimate {
    values: Vec<f64>,
}

impl AttributeEstimate {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values: values.into_iter().map(nnet::clamp_prob).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Entries above 0.5 as a binary vector.
    pub fn binarize(&self) -> crate::phoc::PhocVector {
        crate::phoc::PhocVector::from_bits(self.values.iter().map(|&v| v > 0.5).collect())
    }
}

/// Hidden-layer activations exposed to the task-dependent metaclassifier.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTaps {
    pub taps: Vec<Vec<f64>>,
    pub penultimate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    /// Indices into `hidden`; `None` taps every hidden layer.
    pub tap_layers: Option<Vec<usize>>,
    pub train: TrainConfig,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            input_dim: 256,
            hidden: vec![512, 512],
            tap_layers: None,
            train: TrainConfig::estimator(),
        }
    }
}

impl EstimatorConfig {
    pub fn resolved_taps(&self) -> Vec<usize> {
        self.tap_layers
            .clone()
            .unwrap_or_else(|| (0..self.hidden.len()).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config(
                "estimator needs a positive input_dim and at least one positive hidden width".into(),
            ));
        }
        if self.resolved_taps().iter().any(|&t| t >= self.hidden.len()) {
            return Err(Error::Config("tap layer index out of range".into()));
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeEstimator {
    network: DenseNetwork,
    phoc: PhocConfig,
    tap_layers: Vec<usize>,
    dropout_p: f64,
}

impl AttributeEstimator {
    /// Wraps a network whose last layer emits one sigmoid per PHOC attribute.
    pub fn from_parts(network: DenseNetwork, phoc: PhocConfig, tap_layers: Vec<usize>, dropout_p: f64) -> Result<Self> {
        network.validate()?;
        phoc.validate()?;
        if network.layers.len() < 2 {
            return Err(Error::Model("estimator needs at least one hidden layer".into()));
        }
        if network.output_dim() != phoc.dimension() {
            return Err(Error::shape(phoc.dimension(), network.output_dim()));
        }
        if network.layers.last().unwrap().activation != Activation::Sigmoid {
            return Err(Error::Model("estimator output must be sigmoid".into()));
        }
        if tap_layers.iter().any(|&t| t + 1 >= network.layers.len()) {
            return Err(Error::Model("tap layer index out of range".into()));
        }
        if !(0.0..1.0).contains(&dropout_p) {
            return Err(Error::Model("dropout probability outside [0, 1)".into()));
        }
        Ok(Self {
            network,
            phoc,
            tap_layers,
            dropout_p,
        })
    }

    /// Fresh, untrained estimator with the configured topology.
    pub fn init(phoc: &PhocConfig, config: &EstimatorConfig) -> Result<Self> {
        config.validate()?;
        let mut specs: Vec<LayerSpec> = config
            .hidden
            .iter()
            .map(|&width| LayerSpec {
                width,
                activation: Activation::Relu,
                dropout_after: true,
            })
            .collect();
        specs.push(LayerSpec {
            width: phoc.dimension(),
            activation: Activation::Sigmoid,
            dropout_after: false,
        });
        let seed = crate::seed::derive(config.train.seed, "init");
        let network = DenseNetwork::init(config.input_dim, &specs, seed)?;
        Self::from_parts(network, phoc.clone(), config.resolved_taps(), config.train.dropout_p)
    }

    pub fn network(&self) -> &DenseNetwork {
        &self.network
    }

    pub fn phoc_config(&self) -> &PhocConfig {
        &self.phoc
    }

    pub fn tap_layers(&self) -> &[usize] {
        &self.tap_layers
    }

    pub fn dropout_p(&self) -> f64 {
        self.dropout_p
    }

    pub fn input_dim(&self) -> usize {
        self.network.input_dim()
    }

    /// Width of each tapped hidden layer followed by the last hidden width.
    pub fn tap_widths(&self) -> (Vec<usize>, usize) {
        let hidden = self.network.layers.len() - 1;
        (
            self.tap_layers
                .iter()
                .map(|&t| self.network.layers[t].outputs)
                .collect(),
            self.network.layers[hidden - 1].outputs,
        )
    }

    /// Deterministic eval-mode estimate.
    pub fn estimate(&self, features: &[f64]) -> Result<AttributeEstimate> {
        Ok(AttributeEstimate::new(self.network.predict(features)?))
    }

    /// One estimate per pass with dropout active after every hidden layer.
    pub fn estimate_stochastic(
        &self,
        features: &[f64],
        passes: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<AttributeEstimate>> {
        if passes < 2 {
            return Err(Error::TooFewPasses(passes));
        }
        if features.len() != self.input_dim() {
            return Err(Error::shape(self.input_dim(), features.len()));
        }
        let layers = &self.network.layers;
        let first = &layers[0];
        let mut h0 = first.affine(features);
        for v in &mut h0 {
            *v = first.activation.apply(*v);
        }
        let p = self.dropout_p;
        let scale = 1.0 / (1.0 - p);
        Ok((0..passes)
            .map(|_| {
                let mut h = h0.clone();
                for (l, layer) in layers.iter().enumerate() {
                    if l > 0 {
                        h = layer.affine(&h);
                        for v in &mut h {
                            *v = layer.activation.apply(*v);
                        }
                    }
                    if layer.dropout_after && p > 0.0 {
                        for v in &mut h {
                            *v = if rng.random::<f64>() >= p { *v * scale } else { 0.0 };
                        }
                    }
                }
                AttributeEstimate::new(h)
            })
            .collect())
    }

    /// Eval-mode hidden activations at the tap layers plus the last hidden
    /// layer, alongside the estimate from the same forward pass.
    pub fn forward_with_taps(&self, features: &[f64]) -> Result<(AttributeEstimate, FeatureTaps)> {
        let mut trace = self.network.forward(features, Mode::Eval)?;
        let hidden = self.network.layers.len() - 1;
        let mut acts: Vec<Vec<f64>> = trace.activations.iter_mut().map(|a| a.pop().unwrap()).collect();
        let taps = self.tap_layers.iter().map(|&t| acts[t].clone()).collect();
        let estimate = AttributeEstimate::new(acts.pop().unwrap());
        let penultimate = acts.swap_remove(hidden - 1);
        Ok((estimate, FeatureTaps { taps, penultimate }))
    }

    pub fn hidden_taps(&self, features: &[f64]) -> Result<FeatureTaps> {
        Ok(self.forward_with_taps(features)?.1)
    }

    /// SHA-256 of the serialized estimator document.
    pub fn digest(&self) -> String {
        crate::format::digest(self.to_json().as_bytes())
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            format: &'a str,
            version: u32,
            phoc: &'a PhocConfig,
            phoc_digest: String,
            input_dim: usize,
            tap_layers: &'a [usize],
            dropout_p: f64,
            network: Box<RawValue>,
        }
        serde_json::to_string(&Doc {
            format: ESTIMATOR_FORMAT,
            version: ESTIMATOR_VERSION,
            phoc: &self.phoc,
            phoc_digest: self.phoc.digest(),
            input_dim: self.input_dim(),
            tap_layers: &self.tap_layers,
            dropout_p: self.dropout_p,
            network: nnet::io_raw(&self.network),
        })
        .expect("estimator serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Doc {
            format: String,
            version: u32,
            phoc: PhocConfig,
            phoc_digest: String,
            input_dim: usize,
            tap_layers: Vec<usize>,
            dropout_p: f64,
            network: nnet::NetworkDoc,
        }
        let doc: Doc = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        if doc.format != ESTIMATOR_FORMAT || doc.version != ESTIMATOR_VERSION {
            return Err(Error::Model(format!(
                "expected {ESTIMATOR_FORMAT} v{ESTIMATOR_VERSION}, found {} v{}",
                doc.format, doc.version
            )));
        }
        if doc.phoc_digest != doc.phoc.digest() {
            return Err(Error::Model("PHOC digest does not match the embedded config".into()));
        }
        let network = doc.network.into_network()?;
        if network.input_dim() != doc.input_dim {
            return Err(Error::shape(doc.input_dim, network.input_dim()));
        }
        Self::from_parts(network, doc.phoc, doc.tap_layers, doc.dropout_p)
    }
}

/// Trains an estimator on `(features, transcription)` pairs against their
/// PHOC labels. Returns the estimator and its per-100-iteration loss trace.
pub fn train_estimator<'a>(
    samples: impl IntoIterator<Item = &'a Sample>,
    phoc: &PhocConfig,
    config: &EstimatorConfig,
) -> Result<(AttributeEstimator, Vec<f64>)> {
    let samples: Vec<&Sample> = samples.into_iter().collect();
    if samples.is_empty() {
        return Err(Error::Empty("training split"));
    }
    let mut estimator = AttributeEstimator::init(phoc, config)?;
    let targets = samples
        .iter()
        .map(|s| Ok(build_phoc(&s.transcription, phoc)?.to_targets()))
        .collect::<Result<Vec<_>>>()?;
    let inputs: Vec<&[f64]> = samples.iter().map(|s| s.features.as_slice()).collect();
    let trace = nnet::train(&mut estimator.network, &inputs, &targets, &config.train)?;
    Ok((estimator, trace))
}
