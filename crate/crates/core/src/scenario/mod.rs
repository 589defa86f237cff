//! Desk-scale highway case study: scenario generation, training and the
//! verification bench.

pub mod bench;
pub mod generate;
pub mod train;

pub use bench::{bench, BenchReport, BenchRow, BenchRun, SOUNDNESS_SAMPLES};
pub use generate::{
    generate_scenarios, inject_violations, left_cut_in_pattern, no_left_cut_in_claim,
    ScenarioParams, CLAIM_THRESHOLD, FEATURE_NAMES, LABEL_NAMES, SAFE_LAT_CAP, UNSAFE_GAP,
};
pub use train::{mse, train, Architecture, TrainConfig, TrainedModel};
