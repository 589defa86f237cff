//! Multi-network verification bench: train several configurations on one
//! sanitized dataset and verify the same claim on each.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{sanitize, validate_dataset, Dataset, UnsafePattern};
use crate::error::{Error, Result};
use crate::milp::{check_claim_detailed, MaximizeOptions, SearchStatus};
use crate::network::Network;
use crate::property::{bound_serde, sample_region, SafetyClaim, VerdictStatus};
use crate::scenario::train::{train, TrainConfig};

pub const SOUNDNESS_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub network: String,
    pub architecture: String,
    pub seed: u64,
    pub train_mse: f64,
    /// Certified maximum (gap closed), or `None` when the search did not finish.
    pub max_value: Option<f64>,
    pub verdict: VerdictStatus,
    #[serde(with = "bound_serde")]
    pub upper_bound: f64,
    #[serde(with = "bound_serde")]
    pub lower_bound: f64,
    pub time_s: f64,
    pub nodes: usize,
    pub lp_solves: usize,
    /// Best objective over uniform samples of the claim region.
    #[serde(with = "bound_serde")]
    pub sampled_max: f64,
    /// Counterexample input when the claim is violated.
    pub witness: Option<Vec<f64>>,
}

impl BenchRow {
    pub fn max_display(&self) -> String {
        match self.max_value {
            Some(v) => format!("{v:.6}"),
            None => "n.a.".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub claim: String,
    pub threshold: f64,
    pub records_in: usize,
    pub records_used: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bench report serialization cannot fail")
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Copy with all wall-clock fields zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.rows.iter_mut().for_each(|row| row.time_s = 0.0);
        r
    }

    pub fn render_table(&self) -> String {
        let header = [
            "network".to_string(),
            format!("max lateral velocity under left-occupied region ({})", self.claim),
            "time (s)".to_string(),
            "verdict".to_string(),
        ];
        let rows: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                let verdict = serde_json::to_value(r.verdict)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default();
                let max = if r.max_value.is_none() {
                    format!("{} (unable to find maximum)", r.max_display())
                } else {
                    r.max_display()
                };
                let time = if r.max_value.is_none() && r.verdict == VerdictStatus::Unknown {
                    format!("time-out ({:.1})", r.time_s)
                } else {
                    format!("{:.1}", r.time_s)
                };
                [r.network.clone(), max, time, verdict]
            })
            .collect();
        let mut widths = header.clone().map(|h| h.len());
        for r in &rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let mut s = String::new();
        let line = |s: &mut String, cells: &[String; 4]| {
            let _ = writeln!(
                s,
                "| {:<w0$} | {:<w1$} | {:<w2$} | {:<w3$} |",
                cells[0],
                cells[1],
                cells[2],
                cells[3],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3]
            );
        };
        line(&mut s, &header);
        let _ = writeln!(
            s,
            "|{}|",
            widths.iter().map(|w| "-".repeat(w + 2)).collect::<Vec<_>>().join("|")
        );
        for r in &rows {
            line(&mut s, r);
        }
        let _ = writeln!(s, "threshold: {}", self.threshold);
        s
    }
}

#[derive(Debug, Clone)]
pub struct BenchRun {
    pub report: BenchReport,
    pub networks: Vec<Network>,
}

/// Sanitizes `ds` with `patterns`, trains every config on the result and
/// checks `claim` against each trained network.
pub fn bench(
    ds: &Dataset,
    patterns: &[UnsafePattern],
    configs: &[TrainConfig],
    claim: &SafetyClaim,
    opts: &MaximizeOptions,
) -> Result<BenchRun> {
    if configs.is_empty() {
        return Err(Error::validation("configs", "at least one training config is required"));
    }
    let clean = sanitize(ds, patterns)?;
    debug_assert!(validate_dataset(&clean, patterns)?.is_clean());

    let mut rows = Vec::with_capacity(configs.len());
    let mut networks = Vec::with_capacity(configs.len());
    for cfg in configs {
        let model = train(&clean, cfg)?;
        let net = model.network;
        let (verdict, search) = check_claim_detailed(&net, claim, opts)?;
        let closed = search.status == SearchStatus::Completed
            && search.upper_bound - search.lower_bound <= opts.gap;

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let sampled_max = sample_region(&claim.region, SOUNDNESS_SAMPLES, &mut rng)
            .iter()
            .map(|x| claim.evaluate(&net, x))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);

        rows.push(BenchRow {
            network: cfg.network_name(),
            architecture: cfg.architecture.to_string(),
            seed: cfg.seed,
            train_mse: model.final_mse,
            max_value: closed.then_some(search.upper_bound),
            verdict: verdict.status,
            upper_bound: verdict.upper_bound,
            lower_bound: verdict.lower_bound,
            time_s: verdict.stats.time_s,
            nodes: verdict.stats.nodes,
            lp_solves: verdict.stats.lp_solves,
            sampled_max,
            witness: verdict.witness,
        });
        networks.push(net);
    }
    Ok(BenchRun {
        report: BenchReport {
            claim: claim.name.clone(),
            threshold: claim.threshold,
            records_in: ds.len(),
            records_used: clean.len(),
            rows,
        },
        networks,
    })
}
