//! Dense feed-forward ReLU networks: data model, validation, evaluation and
//! the JSON network document.
//!
//! Hidden layers are always ReLU and the final layer is always linear. All
//! arithmetic is plain `f64`; `forward` is a fixed sequence of operations, so
//! identical inputs produce identical bits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

/// One dense layer: `t = W·in + b`, followed by the activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// Row `i` holds the incoming weights of neuron `i`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>, activation: Activation) -> Self {
        Layer {
            weights,
            bias,
            activation,
        }
    }

    pub fn width(&self) -> usize {
        self.bias.len()
    }

    pub fn fan_in(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Affine part `W·input + b`.
    pub fn pre_activation(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| dot(row, input) + b)
            .collect()
    }

    pub fn activate(&self, pre: &[f64]) -> Vec<f64> {
        match self.activation {
            Activation::Relu => pre.iter().map(|&t| t.max(0.0)).collect(),
            Activation::Linear => pre.to_vec(),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-layer values recorded during a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.post.last().map_or(&[], Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkDoc", into = "NetworkDoc")]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
    metadata: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    input_dim: usize,
    layers: Vec<Layer>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

impl TryFrom<NetworkDoc> for Network {
    type Error = Error;

    fn try_from(doc: NetworkDoc) -> Result<Self> {
        Network::new(doc.input_dim, doc.layers, doc.metadata)
    }
}

impl From<Network> for NetworkDoc {
    fn from(net: Network) -> Self {
        NetworkDoc {
            input_dim: net.input_dim,
            layers: net.layers,
            metadata: net.metadata,
        }
    }
}

impl Network {
    /// Builds a network, checking every structural invariant. Layer numbers
    /// in error paths are 1-based.
    pub fn new(
        input_dim: usize,
        layers: Vec<Layer>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::validation("input_dim", "must be positive"));
        }
        if layers.is_empty() {
            return Err(Error::validation("layers", "at least one layer is required"));
        }
        let mut fan_in = input_dim;
        let last = layers.len() - 1;
        for (li, layer) in layers.iter().enumerate() {
            let path = format!("layers[{}]", li + 1);
            let expected_act = if li == last {
                Activation::Linear
            } else {
                Activation::Relu
            };
            if layer.activation != expected_act {
                return Err(Error::validation(
                    &path,
                    format!(
                        "activation must be {:?} (hidden layers relu, output layer linear)",
                        expected_act
                    )
                    .to_lowercase(),
                ));
            }
            if layer.weights.is_empty() {
                return Err(Error::validation(&path, "layer has no neurons"));
            }
            if layer.bias.len() != layer.weights.len() {
                return Err(Error::validation(
                    &path,
                    format!(
                        "bias length {} does not match {} weight rows",
                        layer.bias.len(),
                        layer.weights.len()
                    ),
                ));
            }
            for (ni, row) in layer.weights.iter().enumerate() {
                if row.len() != fan_in {
                    return Err(Error::validation(
                        format!("{path}.weights[{ni}]"),
                        format!("expects {} inputs but previous width is {}", row.len(), fan_in),
                    ));
                }
                if let Some(j) = row.iter().position(|w| !w.is_finite()) {
                    return Err(Error::validation(
                        format!("{path}.weights[{ni}][{j}]"),
                        "non-finite weight",
                    ));
                }
            }
            if let Some(j) = layer.bias.iter().position(|b| !b.is_finite()) {
                return Err(Error::validation(format!("{path}.bias[{j}]"), "non-finite bias"));
            }
            fan_in = layer.width();
        }
        Ok(Network {
            input_dim,
            layers,
            metadata,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::width)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Hidden (ReLU) layers, i.e. every layer except the output layer.
    pub fn hidden_layers(&self) -> &[Layer] {
        &self.layers[..self.layers.len() - 1]
    }

    pub fn hidden_neuron_count(&self) -> usize {
        self.hidden_layers().iter().map(Layer::width).sum()
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn metadata_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.metadata
    }

    /// Architecture tag such as `2x10`, or `2x10-16` for ragged widths.
    pub fn architecture_tag(&self) -> String {
        let widths: Vec<usize> = self.hidden_layers().iter().map(Layer::width).collect();
        match widths.as_slice() {
            [] => "linear".to_string(),
            [w, rest @ ..] if rest.iter().all(|r| r == w) => format!("{}x{}", widths.len(), w),
            _ => widths
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("-"),
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::dims("network input", self.input_dim, x.len()));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("input[{i}]"), "non-finite input"));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        for layer in &self.layers {
            cur = layer.activate(&layer.pre_activation(&cur));
        }
        Ok(cur)
    }

    /// Forward pass that keeps every layer's pre- and post-activation values.
    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = post.last().map_or(x, Vec::as_slice);
            let t = layer.pre_activation(input);
            post.push(layer.activate(&t));
            pre.push(t);
        }
        Ok(Trace { pre, post })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serialization cannot fail")
    }
}

pub fn load_network(text: &str) -> Result<Network> {
    let doc: NetworkDoc = serde_json::from_str(text)?;
    Network::try_from(doc)
}

pub fn save_network(net: &Network) -> String {
    net.to_json()
}
