mod common;

use common::{random_network, rng};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use relucert::data::{Comparison, Conjunct, Target};
use relucert::{profile, sanitize, validate_dataset, Dataset, Record, UnsafePattern};

fn random_dataset(r: &mut rand_chacha::ChaCha8Rng, n: usize, nf: usize, nl: usize) -> Dataset {
    Dataset::new(
        (0..nf).map(|i| format!("f{i}")).collect(),
        (0..nl).map(|i| format!("l{i}")).collect(),
        (0..n)
            .map(|_| Record {
                // coarse grid so that boundary equality cases occur
                features: (0..nf).map(|_| r.random_range(-4i32..=4) as f64 * 0.5).collect(),
                labels: (0..nl).map(|_| r.random_range(-4i32..=4) as f64 * 0.5).collect(),
            })
            .collect(),
    )
    .unwrap()
}

fn random_patterns(r: &mut rand_chacha::ChaCha8Rng, nf: usize, nl: usize) -> Vec<UnsafePattern> {
    (0..r.random_range(1..=3))
        .map(|p| UnsafePattern {
            name: format!("p{p}"),
            conjuncts: (0..r.random_range(1..=3))
                .map(|_| {
                    let feature = r.random_bool(0.5);
                    Conjunct {
                        target: if feature { Target::Feature } else { Target::Label },
                        index: r.random_range(0..if feature { nf } else { nl }),
                        relation: if r.random_bool(0.5) { Comparison::Le } else { Comparison::Ge },
                        bound: r.random_range(-4i32..=4) as f64 * 0.5,
                    }
                })
                .collect(),
        })
        .collect()
}

/// Independent restatement of the flagging rule.
fn brute_force_flags(ds: &Dataset, p: &UnsafePattern) -> Vec<usize> {
    let mut out = Vec::new();
    'records: for (i, r) in ds.records.iter().enumerate() {
        for c in &p.conjuncts {
            let v = if c.target == Target::Feature { r.features[c.index] } else { r.labels[c.index] };
            let ok = if c.relation == Comparison::Le { v <= c.bound } else { v >= c.bound };
            if !ok {
                continue 'records;
            }
        }
        out.push(i);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn flagging_matches_brute_force(seed in any::<u64>()) {
        let mut r = rng(seed);
        let ds = random_dataset(&mut r, 60, 3, 2);
        let pats = random_patterns(&mut r, 3, 2);
        let rep = validate_dataset(&ds, &pats).unwrap();
        for p in &pats {
            let hits = &rep.patterns[&p.name];
            prop_assert_eq!(&hits.indices, &brute_force_flags(&ds, p));
            prop_assert_eq!(hits.count, hits.indices.len());
        }
    }

    #[test]
    fn sanitize_properties(seed in any::<u64>()) {
        let mut r = rng(seed);
        let ds = random_dataset(&mut r, 60, 3, 2);
        let pats = random_patterns(&mut r, 3, 2);
        let flagged = validate_dataset(&ds, &pats).unwrap().flagged();
        let once = sanitize(&ds, &pats).unwrap();
        prop_assert_eq!(sanitize(&once, &pats).unwrap(), once.clone());
        prop_assert!(validate_dataset(&once, &pats).unwrap().is_clean());
        let kept: Vec<Record> = ds.records.iter().enumerate()
            .filter(|(i, _)| !flagged.contains(i))
            .map(|(_, r)| r.clone())
            .collect();
        prop_assert_eq!(once.records, kept);
    }

    #[test]
    fn csv_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut ds = random_dataset(&mut r, 10, 2, 1);
        for rec in ds.records.iter_mut() {
            rec.features[0] = r.random_range(-1e3..1e3);
        }
        let back = Dataset::read_csv(ds.to_csv_string().as_bytes()).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn profile_invariants(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_network(&mut r, 2);
        let nf = net.input_dim();
        let mut ds = Dataset::new(
            (0..nf).map(|i| format!("x{i}")).collect(),
            vec!["y".into()],
            (0..40).map(|_| Record {
                features: (0..nf).map(|_| r.random_range(-2.0..2.0)).collect(),
                labels: vec![0.0],
            }).collect(),
        ).unwrap();
        let p = profile(&net, &ds, 3).unwrap();
        prop_assert_eq!(p.len(), net.hidden_neuron_count());

        for np in &p {
            prop_assert!((0.0..=1.0).contains(&np.activation_frequency));
            let recount = ds.records.iter()
                .filter(|rec| net.forward_trace(&rec.features).unwrap().post[np.layer][np.index] > 0.0)
                .count();
            prop_assert_eq!(np.activation_frequency, recount as f64 / ds.len() as f64);
            for c in np.feature_correlations.iter().flatten() {
                prop_assert!((-1.0..=1.0).contains(c));
            }
            for w in np.top_features.windows(2) {
                prop_assert!(w[0].abs_correlation > w[1].abs_correlation
                    || (w[0].abs_correlation == w[1].abs_correlation && w[0].feature < w[1].feature));
            }
        }

        ds.records.shuffle(&mut r);
        let q = profile(&net, &ds, 3).unwrap();
        for (a, b) in p.iter().zip(&q) {
            prop_assert_eq!(a.activation_frequency, b.activation_frequency);
            for (ca, cb) in a.feature_correlations.iter().zip(&b.feature_correlations) {
                match (ca, cb) {
                    (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-9),
                    (None, None) => {}
                    _ => prop_assert!(false, "definedness changed under permutation"),
                }
            }
        }
    }
}
