//! Exhaustive phase enumeration: one pure LP per assignment of phases to the
//! crossing neurons. Exponential, only meant as a reference for small nets.
//!
//! The LPs here are built directly from the network (no big-M rows), so this
//! path shares nothing with the encoder beyond the interval bounds used to
//! keep every variable finite.

use crate::bounds::{propagate_box, NeuronPhase};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearConstraint, LinearProgram, LpOutcome, Relation};
use crate::network::Network;
use crate::property::InputRegion;

pub const ORACLE_MAX_CROSSING: usize = 24;

/// Sparse `(terms, relation, rhs)` row.
type Row = (Vec<(usize, f64)>, Relation, f64);

pub fn enumerate_phases(net: &Network, region: &InputRegion, objective: &[f64]) -> Result<f64> {
    region.validate()?;
    if region.dim() != net.input_dim() {
        return Err(Error::dims("region", net.input_dim(), region.dim()));
    }
    if objective.len() != net.output_dim() {
        return Err(Error::dims("objective", net.output_dim(), objective.len()));
    }
    let bounds = propagate_box(net, &region.input_box)?;
    let hidden = net.hidden_layers().len();
    let crossing: Vec<(usize, usize)> = bounds[..hidden]
        .iter()
        .enumerate()
        .flat_map(|(l, lb)| {
            lb.phase
                .iter()
                .enumerate()
                .filter(|(_, p)| **p == NeuronPhase::Crossing)
                .map(move |(n, _)| (l, n))
        })
        .collect();
    if crossing.len() > ORACLE_MAX_CROSSING {
        return Err(Error::OracleGuard {
            crossing: crossing.len(),
            limit: ORACLE_MAX_CROSSING,
        });
    }

    let mut best = f64::NEG_INFINITY;
    for mask in 0u64..(1u64 << crossing.len()) {
        let active = |l: usize, n: usize| -> bool {
            match bounds[l].phase[n] {
                NeuronPhase::StableActive => true,
                NeuronPhase::StableInactive => false,
                NeuronPhase::Crossing => {
                    let k = crossing.iter().position(|c| *c == (l, n)).unwrap();
                    mask & (1 << k) != 0
                }
            }
        };

        // variable layout: inputs, then (t, y) per hidden neuron, then outputs
        let n_in = net.input_dim();
        let mut var_bounds: Vec<(f64, f64)> = region
            .input_box
            .lo
            .iter()
            .copied()
            .zip(region.input_box.hi.iter().copied())
            .collect();
        let mut rows: Vec<Row> = region
            .linear_constraints
            .iter()
            .map(|c| {
                (
                    c.coeffs.iter().copied().enumerate().collect(),
                    c.relation,
                    c.rhs,
                )
            })
            .collect();
        let mut prev: Vec<usize> = (0..n_in).collect();
        let mut outputs = Vec::new();
        for (l, layer) in net.layers().iter().enumerate() {
            let mut cur = Vec::new();
            for (n, (w, b)) in layer.weights.iter().zip(&layer.bias).enumerate() {
                let (lo, hi) = (bounds[l].pre_lo[n], bounds[l].pre_hi[n]);
                let t = var_bounds.len();
                if l == hidden {
                    var_bounds.push((lo, hi));
                    outputs.push(t);
                } else if active(l, n) {
                    var_bounds.push((lo.max(0.0), hi.max(0.0)));
                } else {
                    var_bounds.push((lo.min(0.0), hi.min(0.0)));
                }
                let mut terms = vec![(t, 1.0)];
                terms.extend(prev.iter().zip(w).map(|(&v, &c)| (v, -c)));
                rows.push((terms, Relation::Eq, *b));
                if l == hidden {
                    continue;
                }
                let y = var_bounds.len();
                if active(l, n) {
                    var_bounds.push((lo.max(0.0), hi.max(0.0)));
                    rows.push((vec![(y, 1.0), (t, -1.0)], Relation::Eq, 0.0));
                } else {
                    var_bounds.push((0.0, 0.0));
                }
                cur.push(y);
            }
            prev = cur;
        }

        let nv = var_bounds.len();
        let mut obj = vec![0.0; nv];
        for (&o, &c) in outputs.iter().zip(objective) {
            obj[o] = c;
        }
        let lp = LinearProgram {
            objective: obj,
            constraints: rows
                .into_iter()
                .map(|(terms, rel, rhs)| {
                    let mut coeffs = vec![0.0; nv];
                    for (v, a) in terms {
                        coeffs[v] += a;
                    }
                    LinearConstraint::new(coeffs, rel, rhs)
                })
                .collect(),
            var_bounds,
        };
        // an empty pinned interval (e.g. active with hi < 0) cannot occur:
        // crossing neurons straddle zero and stable ones keep their own side
        if let LpOutcome::Optimal(sol) = solve_lp(&lp)? {
            best = best.max(sol.value);
        }
    }
    Ok(best)
}
