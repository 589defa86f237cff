//! Synthetic highway scenarios around an ego vehicle.
//!
//! Nine features: the ego speed, then an occupancy flag and a gap for each of
//! the nearest vehicles to the left, right, front and rear. Two labels: the
//! suggested lateral velocity (positive is leftward) and the longitudinal
//! acceleration.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::InputBox;
use crate::data::{Comparison, Conjunct, Dataset, Record, Target, UnsafePattern};
use crate::error::{Error, Result};
use crate::property::{InputRegion, SafetyClaim};

pub const FEATURE_NAMES: [&str; 9] = [
    "ego_speed",
    "left_occ",
    "left_gap",
    "right_occ",
    "right_gap",
    "front_occ",
    "front_gap",
    "rear_occ",
    "rear_gap",
];
pub const LABEL_NAMES: [&str; 2] = ["lat_vel", "long_acc"];

pub const EGO_SPEED: usize = 0;
pub const LEFT_OCC: usize = 1;
pub const LEFT_GAP: usize = 2;
pub const RIGHT_OCC: usize = 3;
pub const RIGHT_GAP: usize = 4;
pub const FRONT_OCC: usize = 5;
pub const FRONT_GAP: usize = 6;
pub const LAT_VEL: usize = 0;
pub const LONG_ACC: usize = 1;

pub const SPEED_MAX: f64 = 40.0;
pub const GAP_MAX: f64 = 100.0;
pub const LAT_VEL_RANGE: (f64, f64) = (-4.0, 4.0);
pub const LONG_ACC_RANGE: (f64, f64) = (-3.0, 3.0);
/// A left vehicle closer than this makes a leftward move unsafe.
pub const UNSAFE_GAP: f64 = 20.0;
/// Largest lateral velocity allowed in training data when the left is unsafe.
pub const SAFE_LAT_CAP: f64 = 0.3;
/// Lateral velocity from which a record counts as a risky left move.
pub const RISKY_LAT_VEL: f64 = 1.0;
/// Certified bound on the suggested lateral velocity in the left-occupied region.
pub const CLAIM_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub n_records: usize,
    pub seed: u64,
}

/// Hand-written driving policy used for labels outside the safety rule.
///
/// Blocked by a slower vehicle ahead at speed, it overtakes on the left when
/// that lane is free, otherwise on the right; at cruising speed with a free
/// right lane it drifts back right. It brakes for close front vehicles and
/// otherwise regulates toward 30 m/s.
fn driving_heuristic(f: &[f64]) -> (f64, f64) {
    let ego = f[EGO_SPEED];
    let occupied = |i: usize| f[i] >= 0.5;
    let blocked = occupied(FRONT_OCC) && f[FRONT_GAP] < 40.0;
    let left_free = !occupied(LEFT_OCC) || f[LEFT_GAP] > UNSAFE_GAP;
    let right_free = !occupied(RIGHT_OCC) || f[RIGHT_GAP] > UNSAFE_GAP;

    let lat = if blocked && ego > 15.0 {
        if left_free {
            2.5
        } else if right_free {
            -2.0
        } else {
            0.0
        }
    } else if !blocked && right_free && ego > 25.0 {
        -0.8
    } else {
        0.0
    };
    let acc = if occupied(FRONT_OCC) && f[FRONT_GAP] < 30.0 {
        -3.0 * (1.0 - f[FRONT_GAP] / 30.0)
    } else {
        0.1 * (30.0 - ego)
    };
    (lat, acc)
}

pub fn generate_scenarios(p: &ScenarioParams) -> Result<Dataset> {
    if p.n_records == 0 {
        return Err(Error::validation("n_records", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut records = Vec::with_capacity(p.n_records);
    for _ in 0..p.n_records {
        let mut f = vec![0.0; FEATURE_NAMES.len()];
        f[EGO_SPEED] = rng.random_range(0.0..=SPEED_MAX);
        for slot in 0..4 {
            let occ = rng.random_bool(0.5);
            let gap = rng.random_range(0.0..=GAP_MAX);
            f[1 + 2 * slot] = if occ { 1.0 } else { 0.0 };
            f[2 + 2 * slot] = if occ { gap } else { GAP_MAX };
        }
        // every draw happens unconditionally so the stream layout is fixed
        let lat_noise = rng.random_range(-0.3..=0.3);
        let acc_noise = rng.random_range(-0.2..=0.2);
        let safe_lat = rng.random_range(LAT_VEL_RANGE.0..=SAFE_LAT_CAP);

        let (lat, acc) = driving_heuristic(&f);
        let mut lat = (lat + lat_noise).clamp(LAT_VEL_RANGE.0, LAT_VEL_RANGE.1);
        let acc = (acc + acc_noise).clamp(LONG_ACC_RANGE.0, LONG_ACC_RANGE.1);
        if f[LEFT_OCC] == 1.0 && f[LEFT_GAP] <= UNSAFE_GAP {
            lat = safe_lat;
        }
        records.push(Record {
            features: f,
            labels: vec![lat, acc],
        });
    }
    Dataset::new(
        FEATURE_NAMES.iter().map(ToString::to_string).collect(),
        LABEL_NAMES.iter().map(ToString::to_string).collect(),
        records,
    )
}

/// Left vehicle within the unsafe gap while the label moves left.
pub fn left_cut_in_pattern() -> UnsafePattern {
    UnsafePattern {
        name: "left-cut-in".into(),
        conjuncts: vec![
            Conjunct {
                target: Target::Feature,
                index: LEFT_OCC,
                relation: Comparison::Ge,
                bound: 0.5,
            },
            Conjunct {
                target: Target::Feature,
                index: LEFT_GAP,
                relation: Comparison::Le,
                bound: UNSAFE_GAP,
            },
            Conjunct {
                target: Target::Label,
                index: LAT_VEL,
                relation: Comparison::Ge,
                bound: RISKY_LAT_VEL,
            },
        ],
    }
}

/// Overwrites `count` distinct records with risky left moves. Returns the
/// modified dataset and the ascending ground-truth indices.
pub fn inject_violations(ds: &Dataset, count: usize, seed: u64) -> Result<(Dataset, Vec<usize>)> {
    let col = |names: &[String], name: &str| {
        names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::validation("dataset", format!("missing column {name:?}")))
    };
    let occ = col(&ds.feature_names, FEATURE_NAMES[LEFT_OCC])?;
    let gap = col(&ds.feature_names, FEATURE_NAMES[LEFT_GAP])?;
    let lat = col(&ds.label_names, LABEL_NAMES[LAT_VEL])?;
    if count > ds.len() {
        return Err(Error::validation(
            "count",
            format!("cannot inject {count} violations into {} records", ds.len()),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = sample(&mut rng, ds.len(), count).into_vec();
    indices.sort_unstable();
    let mut out = ds.clone();
    for &i in &indices {
        let r = &mut out.records[i];
        r.features[occ] = 1.0;
        r.features[gap] = rng.random_range(0.0..=UNSAFE_GAP);
        r.labels[lat] = rng.random_range(1.5..=LAT_VEL_RANGE.1);
    }
    Ok((out, indices))
}

/// "The predictor never suggests a large left velocity while a vehicle is
/// close on the left": left occupancy pinned to 1, left gap within the unsafe
/// distance, every other feature over its full range.
pub fn no_left_cut_in_claim(threshold: f64) -> SafetyClaim {
    let mut lo = vec![0.0; FEATURE_NAMES.len()];
    let mut hi = vec![0.0; FEATURE_NAMES.len()];
    hi[EGO_SPEED] = SPEED_MAX;
    for slot in 0..4 {
        hi[1 + 2 * slot] = 1.0;
        hi[2 + 2 * slot] = GAP_MAX;
    }
    lo[LEFT_OCC] = 1.0;
    hi[LEFT_GAP] = UNSAFE_GAP;
    let mut objective = vec![0.0; LABEL_NAMES.len()];
    objective[LAT_VEL] = 1.0;
    SafetyClaim {
        name: "no-left-cut-in".into(),
        region: InputRegion::from_box(InputBox { lo, hi }),
        objective,
        threshold,
    }
}
