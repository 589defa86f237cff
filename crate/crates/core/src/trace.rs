//! Neuron-to-feature traceability: how often each hidden neuron fires and
//! which input features its post-activation moves with.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::Network;

pub const DEFAULT_TOP_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature: usize,
    pub name: String,
    pub abs_correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronProfile {
    pub layer: usize,
    pub index: usize,
    pub activation_frequency: f64,
    pub mean_activation: f64,
    /// Pearson coefficient per input feature; `None` when either series is constant.
    pub feature_correlations: Vec<Option<f64>>,
    pub top_features: Vec<FeatureScore>,
}

/// Pearson correlation, or `None` when either series has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    if n == 0 || n != b.len() || is_constant(a) || is_constant(b) {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|x| *x == v[0])
}

pub fn profile(net: &Network, ds: &Dataset, top_k: usize) -> Result<Vec<NeuronProfile>> {
    if ds.feature_names.len() != net.input_dim() {
        return Err(Error::dims("dataset features", net.input_dim(), ds.feature_names.len()));
    }
    if ds.is_empty() {
        return Err(Error::validation("dataset", "empty dataset"));
    }

    // activations[layer][neuron][record]
    let hidden = net.hidden_layers();
    let mut activations: Vec<Vec<Vec<f64>>> = hidden
        .iter()
        .map(|l| vec![Vec::with_capacity(ds.len()); l.width()])
        .collect();
    for r in &ds.records {
        let trace = net.forward_trace(&r.features)?;
        for (layer_acts, post) in activations.iter_mut().zip(&trace.post) {
            for (series, v) in layer_acts.iter_mut().zip(post) {
                series.push(*v);
            }
        }
    }
    let columns: Vec<Vec<f64>> = (0..net.input_dim())
        .map(|j| ds.records.iter().map(|r| r.features[j]).collect())
        .collect();

    let n = ds.len() as f64;
    let mut out = Vec::with_capacity(net.hidden_neuron_count());
    for (layer, layer_acts) in activations.iter().enumerate() {
        for (index, series) in layer_acts.iter().enumerate() {
            let fired = series.iter().filter(|v| **v > 0.0).count();
            let feature_correlations: Vec<Option<f64>> =
                columns.iter().map(|c| pearson(c, series)).collect();
            let mut ranked: Vec<(usize, f64)> = feature_correlations
                .iter()
                .enumerate()
                .filter_map(|(j, c)| c.map(|c| (j, c.abs())))
                .collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            ranked.truncate(top_k);
            out.push(NeuronProfile {
                layer,
                index,
                activation_frequency: fired as f64 / n,
                mean_activation: series.iter().sum::<f64>() / n,
                feature_correlations,
                top_features: ranked
                    .into_iter()
                    .map(|(feature, abs_correlation)| FeatureScore {
                        feature,
                        name: ds.feature_names[feature].clone(),
                        abs_correlation,
                    })
                    .collect(),
            });
        }
    }
    Ok(out)
}

/// Human-readable table of a profile report.
pub fn render_table(profiles: &[NeuronProfile]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<8} {:>6} {:>8}  top features (|r|)", "neuron", "freq", "mean");
    for p in profiles {
        let tops: Vec<String> = p
            .top_features
            .iter()
            .map(|f| format!("{} ({:.3})", f.name, f.abs_correlation))
            .collect();
        let tops = if tops.is_empty() {
            "-".to_string()
        } else {
            tops.join(", ")
        };
        let _ = writeln!(
            s,
            "{:<8} {:>6.3} {:>8.3}  {}",
            format!("L{}N{}", p.layer, p.index),
            p.activation_frequency,
            p.mean_activation,
            tops
        );
    }
    s
}
