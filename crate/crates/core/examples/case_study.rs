//! End-to-end desk-scale case study: generate scenarios, inject and remove
//! risky records, train two predictors and verify the no-left-cut-in claim.
//!
//! Run with `cargo run --release -p relucert --example case_study`.

use relucert::scenario::{
    bench, generate_scenarios, inject_violations, left_cut_in_pattern, no_left_cut_in_claim,
    ScenarioParams, TrainConfig, CLAIM_THRESHOLD,
};
use relucert::{validate_dataset, MaximizeOptions};

fn main() -> relucert::Result<()> {
    let ds = generate_scenarios(&ScenarioParams {
        n_records: 20_000,
        seed: 2018,
    })?;
    let (dirty, injected) = inject_violations(&ds, 50, 7)?;
    let patterns = [left_cut_in_pattern()];
    let report = validate_dataset(&dirty, &patterns)?;
    println!(
        "validation: {} flagged, {} injected",
        report.total_hits(),
        injected.len()
    );

    let configs: Vec<TrainConfig> = ["2x10", "2x16"]
        .iter()
        .zip([1u64, 2])
        .map(|(a, seed)| TrainConfig::new(a.parse().unwrap(), seed))
        .collect();
    let run = bench(
        &dirty,
        &patterns,
        &configs,
        &no_left_cut_in_claim(CLAIM_THRESHOLD),
        &MaximizeOptions::default().with_timeout_s(240.0),
    )?;
    print!("{}", run.report.render_table());
    for row in &run.report.rows {
        println!(
            "{}: mse {:.4}, nodes {}, lp solves {}, sampled max {:.4}",
            row.network, row.train_mse, row.nodes, row.lp_solves, row.sampled_max
        );
    }
    Ok(())
}
