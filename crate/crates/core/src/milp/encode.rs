//! Big-M mixed-integer encoding of a ReLU network over an input region.
//!
//! For a crossing neuron with pre-activation bounds `L < 0 < U` the rows are
//!
//! ```text
//! y >= 0,  y >= t,  y <= U·δ,  y <= t - L·(1 - δ),   δ ∈ {0, 1}
//! ```
//!
//! Stable neurons need no binary: `y = t` when always active, `y = 0` when
//! always inactive. Every `t` is tied to the previous layer by an equality row.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::bounds::{LayerBounds, NeuronId, NeuronPhase};
use crate::error::{Error, Result};
use crate::lp::{LinearConstraint, LinearProgram, Relation};
use crate::network::Network;
use crate::property::InputRegion;

/// What a MILP variable stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum VarKind {
    Input { index: usize },
    Pre { layer: usize, neuron: usize },
    Post { layer: usize, neuron: usize },
    Output { index: usize },
    Phase { layer: usize, neuron: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseRow {
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NeuronVars {
    pub pre: usize,
    pub post: usize,
    pub phase: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MilpSystem {
    /// Provenance of each variable, indexed by variable id.
    pub vars: Vec<VarKind>,
    pub var_bounds: Vec<(f64, f64)>,
    pub rows: Vec<SparseRow>,
    /// Variable ids of the binary phase variables.
    pub binaries: Vec<usize>,
    pub input_vars: Vec<usize>,
    pub output_vars: Vec<usize>,
    pub neurons: BTreeMap<NeuronId, NeuronVars>,
}

impl MilpSystem {
    fn add_var(&mut self, kind: VarKind, lo: f64, hi: f64) -> usize {
        self.vars.push(kind);
        self.var_bounds.push((lo, hi));
        self.vars.len() - 1
    }

    fn add_row(&mut self, terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.rows.push(SparseRow {
            terms,
            relation,
            rhs,
        });
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    /// Binary phase variables with the neuron each one belongs to.
    pub fn phase_vars(&self) -> impl Iterator<Item = (NeuronId, usize)> + '_ {
        self.neurons
            .iter()
            .filter_map(|(id, v)| v.phase.map(|p| (*id, p)))
    }

    /// LP relaxation (binaries relaxed to `[0, 1]`) maximizing
    /// `objective·outputs`.
    pub fn relaxation(&self, objective: &[f64]) -> Result<LinearProgram> {
        if objective.len() != self.output_vars.len() {
            return Err(Error::dims("objective", self.output_vars.len(), objective.len()));
        }
        let n = self.num_vars();
        let mut obj = vec![0.0; n];
        for (&v, &c) in self.output_vars.iter().zip(objective) {
            obj[v] = c;
        }
        let constraints = self
            .rows
            .iter()
            .map(|r| {
                let mut coeffs = vec![0.0; n];
                for &(v, a) in &r.terms {
                    coeffs[v] += a;
                }
                LinearConstraint::new(coeffs, r.relation, r.rhs)
            })
            .collect();
        Ok(LinearProgram {
            objective: obj,
            constraints,
            var_bounds: self.var_bounds.clone(),
        })
    }

    /// Maximum violation of the rows and bounds at a full assignment.
    pub fn max_violation(&self, assignment: &[f64]) -> f64 {
        let bounds = self
            .var_bounds
            .iter()
            .zip(assignment)
            .map(|((lo, hi), v)| (lo - v).max(v - hi).max(0.0));
        let rows = self.rows.iter().map(|r| {
            let lhs: f64 = r.terms.iter().map(|&(v, a)| a * assignment[v]).sum();
            r.relation.violation(lhs, r.rhs)
        });
        bounds.chain(rows).fold(0.0, f64::max)
    }
}

pub fn encode(net: &Network, region: &InputRegion, bounds: &[LayerBounds]) -> Result<MilpSystem> {
    region.validate()?;
    if region.dim() != net.input_dim() {
        return Err(Error::dims("region", net.input_dim(), region.dim()));
    }
    if bounds.len() != net.layers().len() {
        return Err(Error::dims("layer bounds", net.layers().len(), bounds.len()));
    }
    for (li, (lb, layer)) in bounds.iter().zip(net.layers()).enumerate() {
        if lb.width() != layer.width() || lb.pre_hi.len() != lb.width() {
            return Err(Error::dims(format!("bounds of layer {li}"), layer.width(), lb.width()));
        }
    }

    let mut sys = MilpSystem {
        vars: Vec::new(),
        var_bounds: Vec::new(),
        rows: Vec::new(),
        binaries: Vec::new(),
        input_vars: Vec::new(),
        output_vars: Vec::new(),
        neurons: BTreeMap::new(),
    };

    let b = &region.input_box;
    for i in 0..net.input_dim() {
        let v = sys.add_var(VarKind::Input { index: i }, b.lo[i], b.hi[i]);
        sys.input_vars.push(v);
    }
    for c in &region.linear_constraints {
        let terms = sys
            .input_vars
            .iter()
            .zip(&c.coeffs)
            .filter(|(_, a)| **a != 0.0)
            .map(|(&v, &a)| (v, a))
            .collect();
        sys.add_row(terms, c.relation, c.rhs);
    }

    let last = net.layers().len() - 1;
    let mut prev = sys.input_vars.clone();
    for (li, (layer, lb)) in net.layers().iter().zip(bounds).enumerate() {
        let mut current = Vec::with_capacity(layer.width());
        for (ni, (row, bias)) in layer.weights.iter().zip(&layer.bias).enumerate() {
            let (lo, hi) = (lb.pre_lo[ni], lb.pre_hi[ni]);
            let t = if li == last {
                let v = sys.add_var(VarKind::Output { index: ni }, lo, hi);
                sys.output_vars.push(v);
                v
            } else {
                sys.add_var(VarKind::Pre { layer: li, neuron: ni }, lo, hi)
            };
            // t - W·prev = b
            let mut terms = vec![(t, 1.0)];
            terms.extend(
                prev.iter()
                    .zip(row)
                    .filter(|(_, w)| **w != 0.0)
                    .map(|(&v, &w)| (v, -w)),
            );
            sys.add_row(terms, Relation::Eq, *bias);
            if li == last {
                current.push(t);
                continue;
            }

            let post = VarKind::Post { layer: li, neuron: ni };
            let (y, phase) = match lb.phase[ni] {
                NeuronPhase::StableActive => {
                    let y = sys.add_var(post, lo, hi);
                    sys.add_row(vec![(y, 1.0), (t, -1.0)], Relation::Eq, 0.0);
                    (y, None)
                }
                NeuronPhase::StableInactive => (sys.add_var(post, 0.0, 0.0), None),
                NeuronPhase::Crossing => {
                    let y = sys.add_var(post, 0.0, hi);
                    let d = sys.add_var(VarKind::Phase { layer: li, neuron: ni }, 0.0, 1.0);
                    sys.binaries.push(d);
                    sys.add_row(vec![(y, 1.0)], Relation::Ge, 0.0);
                    sys.add_row(vec![(y, 1.0), (t, -1.0)], Relation::Ge, 0.0);
                    sys.add_row(vec![(y, 1.0), (d, -hi)], Relation::Le, 0.0);
                    sys.add_row(vec![(y, 1.0), (t, -1.0), (d, -lo)], Relation::Le, -lo);
                    (y, Some(d))
                }
            };
            sys.neurons.insert(
                (li, ni),
                NeuronVars {
                    pre: t,
                    post: y,
                    phase,
                },
            );
            current.push(y);
        }
        prev = current;
    }
    Ok(sys)
}
