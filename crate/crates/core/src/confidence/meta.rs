use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use super::pool::pyramid_segments;
use super::{ConfidenceMeasure, ConfidenceScore};
use crate::error::{Error, Result};
use crate::estimator::{AttributeEstimator, FeatureTaps};
use crate::nnet::{
    self, axpy, bce_loss, dot, sigmoid, train, train_learner, Activation, DenseLayer, DenseNetwork, LayerSpec, Learner,
    TrainConfig,
};

pub const META_FORMAT: &str = "wordspot-meta";
pub const META_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetaConfig {
    /// Hidden widths of the task-independent classifier.
    pub hidden: Vec<usize>,
    /// Units each tapped layer is projected to before pooling.
    pub projection_width: usize,
    pub leaky_slope: f64,
    pub pool_levels: Vec<usize>,
    /// Training recipe. `dropout_p` acts on the task-independent
    /// classifier's hidden layers; the task-dependent head has none.
    pub train: TrainConfig,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            hidden: vec![512, 512],
            projection_width: 16,
            leaky_slope: 0.01,
            pool_levels: vec![1, 2, 4, 8],
            train: TrainConfig::metaclassifier(),
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::Config("metaclassifier hidden widths must be positive".into()));
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::Config("leaky_slope must lie in [0, 1)".into()));
        }
        pyramid_segments(self.projection_width, &self.pool_levels)
            .map_err(|_| Error::Config("projection_width must cover every pool level".into()))?;
        self.train.validate()
    }
}

fn labelled<'a>(positives: &[&'a [f64]], negatives: &[&'a [f64]]) -> Result<(Vec<&'a [f64]>, Vec<f64>)> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::Empty("metaclassifier training class"));
    }
    let inputs = positives.iter().chain(negatives).copied().collect();
    let labels = std::iter::repeat_n(1.0, positives.len())
        .chain(std::iter::repeat_n(0.0, negatives.len()))
        .collect();
    Ok((inputs, labels))
}

#[derive(Serialize)]
struct MetaOut<'a> {
    format: &'a str,
    version: u32,
    measure: ConfidenceMeasure,
    estimator_digest: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    network: Option<Box<RawValue>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pool_levels: Option<&'a [usize]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    projections: Option<Vec<Box<RawValue>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    head: Option<Box<RawValue>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaIn {
    format: String,
    version: u32,
    measure: ConfidenceMeasure,
    estimator_digest: Option<String>,
    network: Option<nnet::NetworkDoc>,
    pool_levels: Option<Vec<usize>>,
    projections: Option<Vec<nnet::NetworkDoc>>,
    head: Option<nnet::NetworkDoc>,
}

impl MetaIn {
    fn parse(text: &str, measure: ConfidenceMeasure) -> Result<Self> {
        let doc: MetaIn = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        if doc.format != META_FORMAT || doc.version != META_VERSION {
            return Err(Error::Model(format!(
                "expected {META_FORMAT} v{META_VERSION}, found {} v{}",
                doc.format, doc.version
            )));
        }
        if doc.measure != measure {
            return Err(Error::Incompatible(format!(
                "document holds a {} classifier, expected {measure}",
                doc.measure
            )));
        }
        Ok(doc)
    }
}

fn single_layer(doc: nnet::NetworkDoc) -> Result<DenseLayer> {
    let mut net = doc.into_network()?;
    if net.layers.len() != 1 {
        return Err(Error::Model("expected a single-layer network".into()));
    }
    Ok(net.layers.pop().unwrap())
}

/// Binary classifier on raw input features.
#[derive(Debug, Clone, PartialEq)]
pub struct TiMetaClassifier {
    network: DenseNetwork,
}

impl TiMetaClassifier {
    pub fn from_network(network: DenseNetwork) -> Result<Self> {
        network.validate()?;
        let last = network.layers.last().unwrap();
        if last.outputs != 1 || last.activation != Activation::Sigmoid {
            return Err(Error::Model("metaclassifier must end in one sigmoid unit".into()));
        }
        Ok(Self { network })
    }

    pub fn network(&self) -> &DenseNetwork {
        &self.network
    }

    pub fn logit(&self, features: &[f64]) -> Result<f64> {
        Ok(self.network.logits(features)?[0])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&MetaOut {
            format: META_FORMAT,
            version: META_VERSION,
            measure: ConfidenceMeasure::TiMeta,
            estimator_digest: None,
            network: Some(nnet::io_raw(&self.network)),
            pool_levels: None,
            projections: None,
            head: None,
        })
        .expect("metaclassifier serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc = MetaIn::parse(text, ConfidenceMeasure::TiMeta)?;
        let network = doc
            .network
            .ok_or_else(|| Error::Model("missing `network`".into()))?
            .into_network()?;
        Self::from_network(network)
    }
}

/// Trains the task-independent classifier: label 1 for `positives`
/// (in-domain features), 0 for `negatives`.
pub fn train_ti_meta(
    positives: &[&[f64]],
    negatives: &[&[f64]],
    config: &MetaConfig,
) -> Result<(TiMetaClassifier, Vec<f64>)> {
    config.validate()?;
    let (inputs, labels) = labelled(positives, negatives)?;
    let input_dim = inputs[0].len();
    if input_dim == 0 {
        return Err(Error::Empty("feature vector"));
    }
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
        width: 1,
        activation: Activation::Sigmoid,
        dropout_after: false,
    });
    let seed = crate::seed::derive(config.train.seed, "init");
    let mut network = DenseNetwork::init(input_dim, &specs, seed)?;
    let targets: Vec<[f64; 1]> = labels.iter().map(|&t| [t]).collect();
    let trace = train(&mut network, &inputs, &targets, &config.train)?;
    Ok((TiMetaClassifier { network }, trace))
}

pub fn conf_ti(meta: &TiMetaClassifier, features: &[f64]) -> Result<ConfidenceScore> {
    Ok(ConfidenceScore::new(ConfidenceMeasure::TiMeta, meta.logit(features)?))
}

/// Classifier on the hidden activations of a frozen attribute estimator.
///
/// Each tapped layer is projected to a few leaky-ReLU units and
/// pyramid-pooled; the pooled vectors and the last hidden layer feed one
/// sigmoid unit.
#[derive(Debug, Clone, PartialEq)]
pub struct TdMetaClassifier {
    projections: Vec<DenseLayer>,
    head: DenseLayer,
    pool_levels: Vec<usize>,
    estimator_digest: String,
}

/// Intermediate values of one forward pass, kept for backprop.
struct TdForward {
    pre: Vec<Vec<f64>>,
    head_input: Vec<f64>,
    logit: f64,
}

impl TdMetaClassifier {
    fn new(
        projections: Vec<DenseLayer>,
        head: DenseLayer,
        pool_levels: Vec<usize>,
        estimator_digest: String,
    ) -> Result<Self> {
        let mut pooled = 0;
        for p in &projections {
            if p.inputs * p.outputs != p.weights.len() || p.bias.len() != p.outputs {
                return Err(Error::Model("projection parameter shape mismatch".into()));
            }
            if !matches!(p.activation, Activation::LeakyRelu { .. }) {
                return Err(Error::Model("projections must be leaky ReLU".into()));
            }
            pooled += pyramid_segments(p.outputs, &pool_levels)
                .map_err(|e| Error::Model(e.to_string()))?
                .len();
        }
        if head.outputs != 1 || head.activation != Activation::Sigmoid {
            return Err(Error::Model("metaclassifier must end in one sigmoid unit".into()));
        }
        if head.inputs <= pooled || head.weights.len() != head.inputs || head.bias.len() != 1 {
            return Err(Error::Model("head parameter shape mismatch".into()));
        }
        Ok(Self {
            projections,
            head,
            pool_levels,
            estimator_digest,
        })
    }

    fn init(estimator: &AttributeEstimator, digest: String, config: &MetaConfig) -> Result<Self> {
        let mut rng = crate::seed::rng(crate::seed::derive(config.train.seed, "init"));
        let (tap_widths, penultimate) = estimator.tap_widths();
        let activation = Activation::LeakyRelu {
            slope: config.leaky_slope,
        };
        let projections: Vec<DenseLayer> = tap_widths
            .iter()
            .map(|&w| DenseLayer::init(w, config.projection_width, activation, false, &mut rng))
            .collect();
        let per_tap = config.pool_levels.iter().sum::<usize>();
        let head_inputs = per_tap * projections.len() + penultimate;
        let head = DenseLayer::init(head_inputs, 1, Activation::Sigmoid, false, &mut rng);
        Self::new(projections, head, config.pool_levels.clone(), digest)
    }

    pub fn estimator_digest(&self) -> &str {
        &self.estimator_digest
    }

    /// Fails unless this classifier was trained on the estimator with `digest`.
    pub fn check_estimator(&self, digest: &str) -> Result<()> {
        if self.estimator_digest != digest {
            return Err(Error::Incompatible(format!(
                "metaclassifier was trained on estimator {}, got {digest}",
                self.estimator_digest
            )));
        }
        Ok(())
    }

    fn check_taps(&self, taps: &FeatureTaps) -> Result<()> {
        if taps.taps.len() != self.projections.len() {
            return Err(Error::shape(self.projections.len(), taps.taps.len()));
        }
        for (p, t) in self.projections.iter().zip(&taps.taps) {
            if t.len() != p.inputs {
                return Err(Error::shape(p.inputs, t.len()));
            }
        }
        let pooled = self.head.inputs - taps.penultimate.len();
        if taps.penultimate.len() >= self.head.inputs
            || pooled != self.projections.len() * self.pool_levels.iter().sum::<usize>()
        {
            return Err(Error::shape(self.head.inputs, pooled + taps.penultimate.len()));
        }
        Ok(())
    }

    fn forward(&self, taps: &FeatureTaps, segments: &[Vec<(usize, usize)>]) -> TdForward {
        let mut head_input = Vec::with_capacity(self.head.inputs);
        let pre: Vec<Vec<f64>> = self
            .projections
            .iter()
            .zip(&taps.taps)
            .zip(segments)
            .map(|((p, t), segs)| {
                let z = p.affine(t);
                let a: Vec<f64> = z.iter().map(|&v| p.activation.apply(v)).collect();
                head_input.extend(segs.iter().map(|&(s, e)| a[s..e].iter().sum::<f64>() / (e - s) as f64));
                z
            })
            .collect();
        head_input.extend_from_slice(&taps.penultimate);
        let logit = self.head.bias[0] + dot(&head_input, &self.head.weights);
        TdForward { pre, head_input, logit }
    }

    fn segments(&self) -> Vec<Vec<(usize, usize)>> {
        self.projections
            .iter()
            .map(|p| pyramid_segments(p.outputs, &self.pool_levels).expect("validated"))
            .collect()
    }

    pub fn logit(&self, taps: &FeatureTaps) -> Result<f64> {
        self.check_taps(taps)?;
        Ok(self.forward(taps, &self.segments()).logit)
    }

    pub fn to_json(&self) -> String {
        let one = |l: &DenseLayer| {
            nnet::io_raw(&DenseNetwork {
                layers: vec![l.clone()],
            })
        };
        serde_json::to_string(&MetaOut {
            format: META_FORMAT,
            version: META_VERSION,
            measure: ConfidenceMeasure::TdMeta,
            estimator_digest: Some(&self.estimator_digest),
            network: None,
            pool_levels: Some(&self.pool_levels),
            projections: Some(self.projections.iter().map(one).collect()),
            head: Some(one(&self.head)),
        })
        .expect("metaclassifier serializes")
    }

    /// Loads a classifier and verifies it belongs to the estimator whose
    /// digest is `estimator_digest`.
    pub fn from_json(text: &str, estimator_digest: &str) -> Result<Self> {
        let doc = MetaIn::parse(text, ConfidenceMeasure::TdMeta)?;
        let missing = |f: &str| Error::Model(format!("missing `{f}`"));
        let digest = doc.estimator_digest.ok_or_else(|| missing("estimator_digest"))?;
        let projections = doc
            .projections
            .ok_or_else(|| missing("projections"))?
            .into_iter()
            .map(single_layer)
            .collect::<Result<_>>()?;
        let head = single_layer(doc.head.ok_or_else(|| missing("head"))?)?;
        let pool_levels = doc.pool_levels.ok_or_else(|| missing("pool_levels"))?;
        let meta = Self::new(projections, head, pool_levels, digest)?;
        meta.check_estimator(estimator_digest)?;
        Ok(meta)
    }
}

struct TdLearner<'a> {
    model: &'a mut TdMetaClassifier,
    taps: &'a [FeatureTaps],
    labels: &'a [f64],
    segments: Vec<Vec<(usize, usize)>>,
}

impl Learner for TdLearner<'_> {
    fn parameters(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(2 * self.model.projections.len() + 2);
        for p in &self.model.projections {
            out.push(&p.weights);
            out.push(&p.bias);
        }
        out.push(&self.model.head.weights);
        out.push(&self.model.head.bias);
        out
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(2 * self.model.projections.len() + 2);
        for p in &mut self.model.projections {
            out.push(&mut p.weights);
            out.push(&mut p.bias);
        }
        out.push(&mut self.model.head.weights);
        out.push(&mut self.model.head.bias);
        out
    }

    fn batch_gradient(&self, batch: &[usize], _rng: &mut ChaCha8Rng, grads: &mut [Vec<f64>]) -> f64 {
        let model = &*self.model;
        let n_proj = model.projections.len();
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for &i in batch {
            let taps = &self.taps[i];
            let target = self.labels[i];
            let fwd = model.forward(taps, &self.segments);
            let p = sigmoid(fwd.logit);
            loss += bce_loss(&[p], &[target]).expect("one prediction");
            let delta = nnet::flush((p - target) * scale);

            axpy(&mut grads[2 * n_proj], delta, &fwd.head_input);
            grads[2 * n_proj + 1][0] += delta;

            let mut offset = 0;
            for (j, (proj, segs)) in model.projections.iter().zip(&self.segments).enumerate() {
                let slope = match proj.activation {
                    Activation::LeakyRelu { slope } => slope,
                    _ => unreachable!("validated projection activation"),
                };
                let mut dz = vec![0.0; proj.outputs];
                for (k, &(s, e)) in segs.iter().enumerate() {
                    let g = delta * model.head.weights[offset + k] / (e - s) as f64;
                    for d in &mut dz[s..e] {
                        *d += g;
                    }
                }
                offset += segs.len();
                for (d, &z) in dz.iter_mut().zip(&fwd.pre[j]) {
                    if z <= 0.0 {
                        *d *= slope;
                    }
                }
                let (gw, rest) = grads[2 * j..].split_at_mut(1);
                for (x, &t) in taps.taps[j].iter().enumerate() {
                    if t != 0.0 {
                        axpy(&mut gw[0][x * proj.outputs..(x + 1) * proj.outputs], t, &dz);
                    }
                }
                axpy(&mut rest[0], 1.0, &dz);
            }
        }
        loss * scale
    }
}

/// Trains the task-dependent classifier on taps from `estimator`, which is
/// only read. Label 1 for `positives`, 0 for `negatives`.
pub fn train_td_meta(
    estimator: &AttributeEstimator,
    positives: &[&[f64]],
    negatives: &[&[f64]],
    config: &MetaConfig,
) -> Result<(TdMetaClassifier, Vec<f64>)> {
    config.validate()?;
    let (inputs, labels) = labelled(positives, negatives)?;
    let taps: Vec<FeatureTaps> = inputs.iter().map(|x| estimator.hidden_taps(x)).collect::<Result<_>>()?;
    let mut model = TdMetaClassifier::init(estimator, estimator.digest(), config)?;
    let segments = model.segments();
    let mut learner = TdLearner {
        model: &mut model,
        taps: &taps,
        labels: &labels,
        segments,
    };
    let trace = train_learner(&mut learner, taps.len(), &config.train)?;
    Ok((model, trace))
}

/// Logit of the task-dependent classifier. The caller is responsible for
/// pairing `meta` with the estimator it was trained on; see
/// [`TdMetaClassifier::check_estimator`].
pub fn conf_td(estimator: &AttributeEstimator, meta: &TdMetaClassifier, features: &[f64]) -> Result<ConfidenceScore> {
    let taps = estimator.hidden_taps(features)?;
    Ok(ConfidenceScore::new(ConfidenceMeasure::TdMeta, meta.logit(&taps)?))
}
