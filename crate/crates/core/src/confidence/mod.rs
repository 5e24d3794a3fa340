//! Confidence measures for attribute estimates.
//!
//! Every measure is oriented so that larger values mean more confident:
//! sorting by [`ConfidenceScore::oriented`] descending yields the
//! "most confident first" order used for pruning and WER curves.

mod meta;
mod pool;

pub use meta::{
    conf_td, conf_ti, train_td_meta, train_ti_meta, MetaConfig, TdMetaClassifier, TiMetaClassifier, META_FORMAT,
    META_VERSION,
};
pub use pool::{pyramid_pool_1d, pyramid_segments};

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{AttributeEstimate, AttributeEstimator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceMeasure {
    /// Mean sigmoid activation of the active attributes.
    Activation,
    /// Mean attribute variance under test-time dropout.
    TestDropout,
    /// Task-independent metaclassifier logit.
    TiMeta,
    /// Task-dependent metaclassifier logit.
    TdMeta,
}

impl ConfidenceMeasure {
    pub const ALL: [ConfidenceMeasure; 4] = [
        ConfidenceMeasure::Activation,
        ConfidenceMeasure::TestDropout,
        ConfidenceMeasure::TiMeta,
        ConfidenceMeasure::TdMeta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConfidenceMeasure::Activation => "activation",
            ConfidenceMeasure::TestDropout => "test_dropout",
            ConfidenceMeasure::TiMeta => "ti_meta",
            ConfidenceMeasure::TdMeta => "td_meta",
        }
    }

    /// Sign that turns a raw value into an oriented one.
    pub fn orientation(self) -> f64 {
        match self {
            ConfidenceMeasure::TestDropout => -1.0,
            _ => 1.0,
        }
    }
}

impl fmt::Display for ConfidenceMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConfidenceMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown confidence measure `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceScore {
    pub measure: ConfidenceMeasure,
    pub raw: f64,
    pub oriented: f64,
}

impl ConfidenceScore {
    pub fn new(measure: ConfidenceMeasure, raw: f64) -> Self {
        Self {
            measure,
            raw,
            oriented: measure.orientation() * raw,
        }
    }
}

/// Mean of the attributes above 0.5; zero when none is active.
pub fn conf_activation(estimate: &AttributeEstimate) -> ConfidenceScore {
    let (sum, count) = estimate
        .values()
        .iter()
        .filter(|&&v| v > 0.5)
        .fold((0.0, 0usize), |(s, c), &v| (s + v, c + 1));
    let raw = if count == 0 { 0.0 } else { sum / count as f64 };
    ConfidenceScore::new(ConfidenceMeasure::Activation, raw)
}

/// Mean over attributes of the population variance across passes.
pub fn dropout_variance(passes: &[AttributeEstimate]) -> Result<f64> {
    if passes.len() < 2 {
        return Err(Error::TooFewPasses(passes.len()));
    }
    let dim = passes[0].len();
    if let Some(bad) = passes.iter().find(|p| p.len() != dim) {
        return Err(Error::shape(dim, bad.len()));
    }
    if dim == 0 {
        return Err(Error::Empty("attribute estimate"));
    }
    let n = passes.len() as f64;
    let mut total = 0.0;
    for i in 0..dim {
        let shift = passes[0].values()[i];
        let mean = passes.iter().map(|p| p.values()[i] - shift).sum::<f64>() / n;
        let var = passes
            .iter()
            .map(|p| (p.values()[i] - shift - mean).powi(2))
            .sum::<f64>()
            / n;
        total += var;
    }
    Ok(total / dim as f64)
}

pub fn conf_test_dropout(
    estimator: &AttributeEstimator,
    features: &[f64],
    passes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ConfidenceScore> {
    let estimates = estimator.estimate_stochastic(features, passes, rng)?;
    Ok(ConfidenceScore::new(
        ConfidenceMeasure::TestDropout,
        dropout_variance(&estimates)?,
    ))
}
