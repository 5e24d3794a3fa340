//! Versioned JSON documents for dense networks.
//!
//! ```json
//! {"format":"wordspot-dense","version":1,"layers":[
//!   {"inputs":256,"outputs":512,"activation":{"kind":"relu"},"dropout_after":true,
//!    "weights":[...],"bias":[...]}]}
//! ```
//!
//! `weights` is the `inputs × outputs` matrix flattened row-major (one row per
//! input unit). Reals use the fixed 17-significant-digit encoding from
//! [`crate::format`], so a write/read round trip is bit-exact.

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use super::{Activation, DenseLayer, DenseNetwork};
use crate::error::{Error, Result};
use crate::format::real_array;

pub const NETWORK_FORMAT: &str = "wordspot-dense";
pub const NETWORK_VERSION: u32 = 1;

#[derive(Serialize)]
struct LayerOut {
    inputs: usize,
    outputs: usize,
    activation: Activation,
    dropout_after: bool,
    weights: Box<RawValue>,
    bias: Box<RawValue>,
}

#[derive(Serialize)]
struct NetworkOut<'a> {
    format: &'a str,
    version: u32,
    layers: Vec<LayerOut>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerIn {
    inputs: usize,
    outputs: usize,
    activation: Activation,
    dropout_after: bool,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct NetworkIn {
    format: String,
    version: u32,
    layers: Vec<LayerIn>,
}

impl NetworkIn {
    pub(crate) fn into_network(self) -> Result<DenseNetwork> {
        if self.format != NETWORK_FORMAT {
            return Err(Error::Model(format!("unexpected format `{}`", self.format)));
        }
        if self.version != NETWORK_VERSION {
            return Err(Error::Model(format!("unsupported version {}", self.version)));
        }
        let layers = self
            .layers
            .into_iter()
            .map(|l| DenseLayer {
                inputs: l.inputs,
                outputs: l.outputs,
                weights: l.weights,
                bias: l.bias,
                activation: l.activation,
                dropout_after: l.dropout_after,
            })
            .collect();
        DenseNetwork::new(layers)
    }
}

pub(crate) fn network_raw(net: &DenseNetwork) -> Box<RawValue> {
    RawValue::from_string(write_network(net)).expect("network document is valid JSON")
}

pub fn write_network(net: &DenseNetwork) -> String {
    let raw = |v: &[f64]| RawValue::from_string(real_array(v)).expect("valid JSON array");
    let doc = NetworkOut {
        format: NETWORK_FORMAT,
        version: NETWORK_VERSION,
        layers: net
            .layers
            .iter()
            .map(|l| LayerOut {
                inputs: l.inputs,
                outputs: l.outputs,
                activation: l.activation,
                dropout_after: l.dropout_after,
                weights: raw(&l.weights),
                bias: raw(&l.bias),
            })
            .collect(),
    };
    serde_json::to_string(&doc).expect("network serializes")
}

pub fn read_network(text: &str) -> Result<DenseNetwork> {
    let doc: NetworkIn = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
    doc.into_network()
}
