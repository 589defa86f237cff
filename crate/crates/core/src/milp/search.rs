//! Best-first branch-and-bound over ReLU phases.
//!
//! Each node is a set of phase fixings. Its relaxation is the big-M LP built
//! from interval bounds re-propagated under those fixings, so a fixed neuron
//! becomes stable and loses its binary. The x-part of every relaxation optimum
//! is evaluated exactly through the network to produce incumbents, which makes
//! the lower bound always attained by a concrete input.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{propagate_with_fixings, FixedPhase, NeuronId, PhaseFixings};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpOutcome};
use crate::milp::encode::encode;
use crate::network::{dot, Network};
use crate::property::{bound_serde, replay_witness, InputRegion, SafetyClaim, SolverStats, Verdict, VerdictStatus};

pub const DEFAULT_GAP: f64 = 1e-6;
pub const DEFAULT_TIMEOUT_S: f64 = 600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum SearchMode {
    Deterministic,
    Parallel { workers: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximizeOptions {
    pub timeout: Duration,
    /// Absolute optimality gap.
    pub gap: f64,
    pub mode: SearchMode,
    pub node_limit: Option<usize>,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        MaximizeOptions {
            timeout: Duration::from_secs_f64(DEFAULT_TIMEOUT_S),
            gap: DEFAULT_GAP,
            mode: SearchMode::Deterministic,
            node_limit: None,
        }
    }
}

impl MaximizeOptions {
    pub fn with_timeout_s(mut self, secs: f64) -> Self {
        self.timeout = Duration::from_secs_f64(secs);
        self
    }

    pub fn with_mode(mut self, mode: SearchMode) -> Self {
        self.mode = mode;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    /// Frontier exhausted; `upper - lower <= gap`.
    Completed,
    /// Stopped by the timeout or node limit; both bounds still valid.
    Interrupted,
    /// Some relaxation failed numerically; bounds are valid but the gap may be open.
    NumericalTrouble,
    RegionEmpty,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaximizeResult {
    pub status: SearchStatus,
    #[serde(serialize_with = "bound_serde::serialize")]
    pub upper_bound: f64,
    #[serde(serialize_with = "bound_serde::serialize")]
    pub lower_bound: f64,
    /// Best input found; its objective value is at least `lower_bound`.
    pub argmax: Option<Vec<f64>>,
    pub stats: SolverStats,
    /// `(lower, upper)` after the root and after every node expansion.
    pub progress: Vec<(f64, f64)>,
}

impl MaximizeResult {
    pub fn gap_closed(&self, gap: f64) -> bool {
        self.status == SearchStatus::Completed && self.upper_bound - self.lower_bound <= gap
    }
}

struct Node {
    id: u64,
    depth: usize,
    fixings: PhaseFixings,
    bound: f64,
    /// Relaxed phase values of this node's crossing neurons, in neuron order.
    deltas: Vec<(NeuronId, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // max-heap: larger bound first, then older node first
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

enum Evaluation {
    Infeasible,
    Failed,
    Feasible {
        bound: f64,
        deltas: Vec<(NeuronId, f64)>,
        candidate: Vec<f64>,
        value: f64,
    },
}

struct Problem<'a> {
    net: &'a Network,
    region: &'a InputRegion,
    objective: &'a [f64],
}

impl Problem<'_> {
    /// Solves the relaxation of a node. Returns the evaluation and whether an
    /// LP was actually solved.
    fn evaluate(&self, fixings: &PhaseFixings, parent_bound: f64) -> Result<(Evaluation, bool)> {
        let Some(bounds) = propagate_with_fixings(self.net, &self.region.input_box, fixings)? else {
            return Ok((Evaluation::Infeasible, false));
        };
        let sys = encode(self.net, self.region, &bounds)?;
        let lp = sys.relaxation(self.objective)?;
        let sol = match solve_lp(&lp) {
            Ok(LpOutcome::Optimal(s)) => s,
            Ok(LpOutcome::Infeasible) => return Ok((Evaluation::Infeasible, true)),
            Err(Error::Numerical(_)) => return Ok((Evaluation::Failed, true)),
            Err(e) => return Err(e),
        };
        let x: Vec<f64> = sys.input_vars.iter().map(|&v| sol.point[v]).collect();
        let candidate = self.region.input_box.clamp(&x);
        let value = dot(self.objective, &self.net.forward(&candidate)?);
        let deltas = sys
            .phase_vars()
            .map(|(id, v)| (id, sol.point[v]))
            .collect();
        Ok((
            Evaluation::Feasible {
                bound: sol.value.min(parent_bound),
                deltas,
                candidate,
                value,
            },
            true,
        ))
    }
}

/// Most fractional phase variable; ties go to the earliest layer, then the
/// lowest neuron index (the deltas are already in that order).
fn branching_neuron(deltas: &[(NeuronId, f64)]) -> Option<NeuronId> {
    let mut best: Option<(NeuronId, f64)> = None;
    for &(id, d) in deltas {
        let score = (d - 0.5).abs();
        match best {
            Some((_, s)) if score >= s - 1e-12 => {}
            _ => best = Some((id, score)),
        }
    }
    best.map(|(id, _)| id)
}

struct Search {
    heap: BinaryHeap<Node>,
    next_id: u64,
    incumbent: f64,
    argmax: Option<Vec<f64>>,
    /// Largest bound among nodes closed without branching.
    closed_max: f64,
    /// Largest parent bound of nodes whose relaxation failed.
    unresolved: f64,
    stats: SolverStats,
    progress: Vec<(f64, f64)>,
    /// Smallest upper bound reported so far.
    reported_upper: f64,
    gap: f64,
}

impl Search {
    fn upper(&self) -> f64 {
        let open = self.heap.peek().map_or(f64::NEG_INFINITY, |n| n.bound);
        open.max(self.closed_max).max(self.incumbent).max(self.unresolved)
    }

    /// Reported `(lower, upper)`. An incumbent can beat an LP bound by
    /// roundoff; the pair is clipped so that it stays ordered and monotone.
    fn reported(&mut self) -> (f64, f64) {
        let upper = self.upper().min(self.reported_upper);
        self.reported_upper = upper;
        (self.incumbent.min(upper), upper)
    }

    fn record(&mut self) {
        let pair = self.reported();
        self.progress.push(pair);
    }

    fn absorb(
        &mut self,
        eval: Evaluation,
        solved: bool,
        fixings: PhaseFixings,
        depth: usize,
        parent_bound: f64,
    ) {
        self.stats.nodes += 1;
        if solved {
            self.stats.lp_solves += 1;
        }
        match eval {
            Evaluation::Infeasible => {}
            Evaluation::Failed => self.unresolved = self.unresolved.max(parent_bound),
            Evaluation::Feasible {
                bound,
                deltas,
                candidate,
                value,
            } => {
                if value > self.incumbent {
                    self.incumbent = value;
                    self.argmax = Some(candidate);
                }
                if bound <= self.incumbent + self.gap || deltas.is_empty() {
                    self.closed_max = self.closed_max.max(bound);
                } else {
                    let id = self.next_id;
                    self.next_id += 1;
                    self.heap.push(Node {
                        id,
                        depth,
                        fixings,
                        bound,
                        deltas,
                    });
                }
            }
        }
    }
}

fn children(node: &Node) -> Vec<(PhaseFixings, usize, f64)> {
    let Some(neuron) = branching_neuron(&node.deltas) else {
        return Vec::new();
    };
    [FixedPhase::Inactive, FixedPhase::Active]
        .into_iter()
        .map(|phase| {
            let mut f = node.fixings.clone();
            f.insert(neuron, phase);
            (f, node.depth + 1, node.bound)
        })
        .collect()
}

/// Maximizes `objective·f(x)` over the region.
pub fn maximize(
    net: &Network,
    region: &InputRegion,
    objective: &[f64],
    opts: &MaximizeOptions,
) -> Result<MaximizeResult> {
    let start = Instant::now();
    region.validate()?;
    if region.dim() != net.input_dim() {
        return Err(Error::dims("region", net.input_dim(), region.dim()));
    }
    if objective.len() != net.output_dim() {
        return Err(Error::dims("objective", net.output_dim(), objective.len()));
    }
    if !(opts.gap >= 0.0) || opts.timeout.is_zero() {
        return Err(Error::validation("options", "gap must be >= 0 and timeout > 0"));
    }
    let problem = Problem {
        net,
        region,
        objective,
    };

    let mut search = Search {
        heap: BinaryHeap::new(),
        next_id: 0,
        incumbent: f64::NEG_INFINITY,
        argmax: None,
        closed_max: f64::NEG_INFINITY,
        unresolved: f64::NEG_INFINITY,
        stats: SolverStats::default(),
        progress: Vec::new(),
        reported_upper: f64::INFINITY,
        gap: opts.gap,
    };

    let (root, solved) = problem.evaluate(&PhaseFixings::new(), f64::INFINITY)?;
    match root {
        Evaluation::Infeasible => {
            search.stats.nodes = 1;
            search.stats.lp_solves = usize::from(solved);
            search.stats.time_s = start.elapsed().as_secs_f64();
            return Ok(MaximizeResult {
                status: SearchStatus::RegionEmpty,
                upper_bound: f64::NEG_INFINITY,
                lower_bound: f64::NEG_INFINITY,
                argmax: None,
                stats: search.stats,
                progress: Vec::new(),
            });
        }
        Evaluation::Failed => {
            return Err(Error::Numerical("root relaxation could not be solved".into()));
        }
        feasible => search.absorb(feasible, solved, PhaseFixings::new(), 0, f64::INFINITY),
    }
    search.record();

    let pool = match opts.mode {
        SearchMode::Deterministic => None,
        SearchMode::Parallel { workers } => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers.max(1))
                .build()
                .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?,
        ),
    };
    let batch = match opts.mode {
        SearchMode::Deterministic => 1,
        SearchMode::Parallel { workers } => workers.max(1),
    };

    let mut interrupted = false;
    while !search.heap.is_empty() {
        if start.elapsed() >= opts.timeout
            || opts.node_limit.is_some_and(|l| search.stats.nodes >= l)
        {
            interrupted = true;
            break;
        }
        let mut expand = Vec::with_capacity(batch);
        while expand.len() < batch {
            let Some(node) = search.heap.pop() else { break };
            if node.bound <= search.incumbent + search.gap {
                search.closed_max = search.closed_max.max(node.bound);
                continue;
            }
            expand.push(node);
        }
        let jobs: Vec<(PhaseFixings, usize, f64)> = expand.iter().flat_map(children).collect();
        let evals: Vec<Result<(Evaluation, bool)>> = match &pool {
            None => jobs
                .iter()
                .map(|(f, _, pb)| problem.evaluate(f, *pb))
                .collect(),
            Some(pool) => pool.install(|| {
                jobs.par_iter()
                    .map(|(f, _, pb)| problem.evaluate(f, *pb))
                    .collect()
            }),
        };
        for ((fixings, depth, parent_bound), eval) in jobs.into_iter().zip(evals) {
            let (eval, solved) = eval?;
            search.absorb(eval, solved, fixings, depth, parent_bound);
        }
        if !expand.is_empty() {
            search.record();
        }
    }

    let (lower, upper) = search.reported();
    let status = if interrupted {
        SearchStatus::Interrupted
    } else if search.unresolved > search.incumbent + search.gap {
        SearchStatus::NumericalTrouble
    } else {
        SearchStatus::Completed
    };
    search.stats.time_s = start.elapsed().as_secs_f64();
    Ok(MaximizeResult {
        status,
        upper_bound: upper,
        lower_bound: lower,
        argmax: search.argmax,
        stats: search.stats,
        progress: search.progress,
    })
}

/// Runs `maximize` over the claim region and turns the bounds into a verdict.
/// A violated verdict is only emitted after its witness replays.
pub fn check_claim(net: &Network, claim: &SafetyClaim, opts: &MaximizeOptions) -> Result<Verdict> {
    Ok(check_claim_detailed(net, claim, opts)?.0)
}

/// Like [`check_claim`] but also returns the underlying search result.
pub fn check_claim_detailed(
    net: &Network,
    claim: &SafetyClaim,
    opts: &MaximizeOptions,
) -> Result<(Verdict, MaximizeResult)> {
    claim.validate()?;
    claim.validate_for(net)?;
    let res = maximize(net, &claim.region, &claim.objective, opts)?;
    let (status, witness) = if res.status == SearchStatus::RegionEmpty {
        (VerdictStatus::RegionEmpty, None)
    } else if res.upper_bound <= claim.threshold {
        (VerdictStatus::Proved, None)
    } else {
        match &res.argmax {
            Some(x) if res.lower_bound > claim.threshold && replay_witness(net, claim, x)? => {
                (VerdictStatus::Violated, Some(x.clone()))
            }
            _ => (VerdictStatus::Unknown, None),
        }
    };
    let verdict = Verdict {
        status,
        upper_bound: res.upper_bound,
        lower_bound: res.lower_bound,
        witness,
        stats: res.stats.clone(),
    };
    verdict.check_invariants(net, claim)?;
    Ok((verdict, res))
}
