//! Seeded fixtures shared by the benchmarks.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relucert::{
    Activation, InputBox, Layer, LinearConstraint, LinearProgram, Network, Relation,
};

/// Dense ReLU network with the given hidden widths and one linear output.
pub fn network(input_dim: usize, hidden: &[usize], seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut widths = vec![input_dim];
    widths.extend_from_slice(hidden);
    widths.push(1);
    let last = widths.len() - 2;
    let layers = widths
        .windows(2)
        .enumerate()
        .map(|(i, p)| {
            let scale = (1.0 / p[0] as f64).sqrt();
            Layer::new(
                (0..p[1])
                    .map(|_| (0..p[0]).map(|_| rng.random_range(-scale..scale)).collect())
                    .collect(),
                (0..p[1]).map(|_| rng.random_range(-0.1..0.1)).collect(),
                if i == last { Activation::Linear } else { Activation::Relu },
            )
        })
        .collect();
    Network::new(input_dim, layers, BTreeMap::new()).expect("fixture network is valid")
}

pub fn unit_box(dim: usize) -> InputBox {
    InputBox::new(vec![-1.0; dim], vec![1.0; dim]).expect("unit box is valid")
}

/// Feasible LP: every row holds at a random interior point.
pub fn lp(n: usize, rows: usize, seed: u64) -> LinearProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
    LinearProgram {
        objective: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        constraints: (0..rows)
            .map(|_| {
                let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let at: f64 = a.iter().zip(&x0).map(|(a, x)| a * x).sum();
                LinearConstraint::new(a, Relation::Le, at + rng.random_range(0.0..0.5))
            })
            .collect(),
        var_bounds: vec![(-1.0, 1.0); n],
    }
}
