//! Test-only helpers: independent reference oracles and random instance
//! generators. Nothing here calls into the simplex or the branch-and-bound.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relucert::{
    Activation, InputBox, InputRegion, Layer, LinearConstraint, LinearProgram, Network, Relation,
};

/// Solves a dense square system by Gaussian elimination with partial
/// pivoting. `None` when (numerically) singular.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Brute-force LP optimum by enumerating every vertex candidate (every choice
/// of `n` tight hyperplanes among rows and bounds). `None` if infeasible.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.objective.len();
    let mut planes: Vec<(Vec<f64>, f64)> = lp
        .constraints
        .iter()
        .map(|c| (c.coeffs.clone(), c.rhs))
        .collect();
    for (j, (lo, hi)) in lp.var_bounds.iter().enumerate() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), *lo));
        planes.push((e, *hi));
    }
    let feasible = |x: &[f64]| {
        lp.var_bounds
            .iter()
            .zip(x)
            .all(|((l, h), v)| *v >= l - 1e-9 && *v <= h + 1e-9)
            && lp.constraints.iter().all(|c| c.violation(x) <= 1e-9)
    };
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            if feasible(&x) {
                let v: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
        // next n-combination of plane indices
        let m = planes.len();
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < m - n + i {
                idx[i] += 1;
                for k in i + 1..n {
                    idx[k] = idx[k - 1] + 1;
                }
                break;
            }
        }
    }
}

pub fn random_lp(rng: &mut ChaCha8Rng, n: usize, rows: usize) -> LinearProgram {
    let relations = [Relation::Le, Relation::Ge, Relation::Le, Relation::Eq];
    LinearProgram {
        objective: (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
        constraints: (0..rows)
            .map(|_| {
                let rel = relations[rng.random_range(0..relations.len())];
                LinearConstraint::new(
                    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
                    rel,
                    rng.random_range(-2.0..3.0),
                )
            })
            .collect(),
        var_bounds: (0..n)
            .map(|_| {
                let lo = rng.random_range(-3.0..1.0);
                (lo, lo + rng.random_range(0.5..4.0))
            })
            .collect(),
    }
}

/// Random dense ReLU network with 1..=`max_hidden` hidden layers.
pub fn random_network(rng: &mut ChaCha8Rng, max_hidden: usize) -> Network {
    let n_in = rng.random_range(1..=3);
    let n_out = rng.random_range(1..=2);
    let hidden = rng.random_range(1..=max_hidden);
    let mut widths = vec![n_in];
    for _ in 0..hidden {
        widths.push(rng.random_range(2..=5));
    }
    widths.push(n_out);
    let last = widths.len() - 2;
    let layers = widths
        .windows(2)
        .enumerate()
        .map(|(i, p)| {
            Layer::new(
                (0..p[1])
                    .map(|_| (0..p[0]).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect(),
                (0..p[1]).map(|_| rng.random_range(-0.5..0.5)).collect(),
                if i == last {
                    Activation::Linear
                } else {
                    Activation::Relu
                },
            )
        })
        .collect();
    Network::new(n_in, layers, BTreeMap::new()).unwrap()
}

pub fn random_box(rng: &mut ChaCha8Rng, dim: usize) -> InputBox {
    let lo: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..0.5)).collect();
    let hi = lo.iter().map(|l| l + rng.random_range(0.2..2.5)).collect();
    InputBox::new(lo, hi).unwrap()
}

/// Random region: a box, sometimes with one extra half-space through an
/// interior point so the region stays nonempty.
pub fn random_region(rng: &mut ChaCha8Rng, dim: usize) -> InputRegion {
    let b = random_box(rng, dim);
    let mut region = InputRegion::from_box(b.clone());
    if rng.random_bool(0.3) {
        let center: Vec<f64> = b.lo.iter().zip(&b.hi).map(|(l, h)| 0.5 * (l + h)).collect();
        let coeffs: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let at_center: f64 = coeffs.iter().zip(&center).map(|(a, c)| a * c).sum();
        region
            .linear_constraints
            .push(LinearConstraint::new(coeffs, Relation::Le, at_center + 0.1));
    }
    region
}

pub fn random_objective(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
