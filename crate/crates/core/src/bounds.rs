//! Interval bound propagation over an input box.
//!
//! The per-neuron pre-activation intervals produced here are the big-M
//! constants of the MILP encoding and decide which neurons need a binary
//! phase variable at all.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Activation, Network};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl InputBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let b = InputBox { lo, hi };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.len() != self.hi.len() {
            return Err(Error::dims("box.hi", self.lo.len(), self.hi.len()));
        }
        for (i, (l, h)) in self.lo.iter().zip(&self.hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(Error::validation(
                    format!("box[{i}]"),
                    "unbounded or non-finite input interval",
                ));
            }
            if l > h {
                return Err(Error::validation(format!("box[{i}]"), format!("lo {l} > hi {h}")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
    }

    /// Clamps `x` coordinate-wise into the box.
    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (l, h))| v.clamp(*l, *h))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeuronPhase {
    StableActive,
    StableInactive,
    Crossing,
}

impl NeuronPhase {
    pub fn classify(lo: f64, hi: f64) -> Self {
        if lo >= 0.0 {
            NeuronPhase::StableActive
        } else if hi <= 0.0 {
            NeuronPhase::StableInactive
        } else {
            NeuronPhase::Crossing
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerBounds {
    pub pre_lo: Vec<f64>,
    pub pre_hi: Vec<f64>,
    pub phase: Vec<NeuronPhase>,
}

impl LayerBounds {
    fn from_intervals(pre_lo: Vec<f64>, pre_hi: Vec<f64>) -> Self {
        let phase = pre_lo
            .iter()
            .zip(&pre_hi)
            .map(|(&l, &h)| NeuronPhase::classify(l, h))
            .collect();
        LayerBounds {
            pre_lo,
            pre_hi,
            phase,
        }
    }

    pub fn width(&self) -> usize {
        self.pre_lo.len()
    }

    pub fn crossing_count(&self) -> usize {
        self.phase
            .iter()
            .filter(|p| **p == NeuronPhase::Crossing)
            .count()
    }
}

/// Phase decision imposed on a single neuron during branching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedPhase {
    Active,
    Inactive,
}

/// Neuron id: (layer index, neuron index), both 0-based.
pub type NeuronId = (usize, usize);

pub type PhaseFixings = BTreeMap<NeuronId, FixedPhase>;

pub fn propagate_box(net: &Network, input: &InputBox) -> Result<Vec<LayerBounds>> {
    propagate_with_fixings(net, input, &PhaseFixings::new())?.ok_or_else(|| {
        Error::Numerical("interval propagation produced an empty interval without fixings".into())
    })
}

/// Interval propagation where fixed neurons have their pre-activation interval
/// clamped to the chosen side of zero before feeding the next layer.
///
/// Returns `Ok(None)` when a fixing contradicts the propagated interval, i.e.
/// the node it describes is infeasible.
pub fn propagate_with_fixings(
    net: &Network,
    input: &InputBox,
    fixings: &PhaseFixings,
) -> Result<Option<Vec<LayerBounds>>> {
    input.validate()?;
    if input.dim() != net.input_dim() {
        return Err(Error::dims("input box", net.input_dim(), input.dim()));
    }
    let mut in_lo = input.lo.clone();
    let mut in_hi = input.hi.clone();
    let mut out = Vec::with_capacity(net.layers().len());
    for (li, layer) in net.layers().iter().enumerate() {
        let mut lo = Vec::with_capacity(layer.width());
        let mut hi = Vec::with_capacity(layer.width());
        for (ni, (row, b)) in layer.weights.iter().zip(&layer.bias).enumerate() {
            let (mut l, mut h) = (*b, *b);
            for ((w, a), z) in row.iter().zip(&in_lo).zip(&in_hi) {
                if *w >= 0.0 {
                    l += w * a;
                    h += w * z;
                } else {
                    l += w * z;
                    h += w * a;
                }
            }
            match fixings.get(&(li, ni)) {
                Some(FixedPhase::Active) => l = l.max(0.0),
                Some(FixedPhase::Inactive) => h = h.min(0.0),
                None => {}
            }
            if l > h {
                return Ok(None);
            }
            lo.push(l);
            hi.push(h);
        }
        if layer.activation == Activation::Relu {
            in_lo = lo.iter().map(|v| v.max(0.0)).collect();
            in_hi = hi.iter().map(|v| v.max(0.0)).collect();
        }
        out.push(LayerBounds::from_intervals(lo, hi));
    }
    Ok(Some(out))
}

/// Total crossing neurons over the hidden layers.
pub fn crossing_count(net: &Network, bounds: &[LayerBounds]) -> usize {
    bounds[..net.hidden_layers().len()]
        .iter()
        .map(LayerBounds::crossing_count)
        .sum()
}
