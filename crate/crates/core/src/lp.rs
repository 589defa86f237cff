//! Dense bounded-variable primal simplex.
//!
//! Maximizes `c·x` subject to linear rows and finite per-variable bounds.
//! Bounds are handled natively: a nonbasic variable sits at one of its bounds
//! and may "flip" to the other without a pivot. Phase 1 minimizes the sum of
//! artificial variables; Bland's smallest-index rule is used for both the
//! entering and the leaving choice, so the method cannot cycle.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Primal feasibility tolerance for rows, bounds and the phase-1 certificate.
pub const FEAS_TOL: f64 = 1e-7;
/// Reduced-cost optimality tolerance.
pub const OPT_TOL: f64 = 1e-9;
pub const PIVOT_LIMIT: usize = 1_000_000;

const PIVOT_TOL: f64 = 1e-9;
const RATIO_TIE_TOL: f64 = 1e-12;
const REFRESH_EVERY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl Relation {
    /// Amount by which `lhs rel rhs` is violated (0 when satisfied).
    pub fn violation(self, lhs: f64, rhs: f64) -> f64 {
        match self {
            Relation::Le => (lhs - rhs).max(0.0),
            Relation::Ge => (rhs - lhs).max(0.0),
            Relation::Eq => (lhs - rhs).abs(),
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub coeffs: Vec<f64>,
    #[serde(rename = "rel")]
    pub relation: Relation,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        LinearConstraint {
            coeffs,
            relation,
            rhs,
        }
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs: f64 = self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
        self.relation.violation(lhs, self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<LinearConstraint>,
    pub var_bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.var_bounds.len() != n {
            return Err(Error::dims("lp var_bounds", n, self.var_bounds.len()));
        }
        if let Some(j) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(Error::validation(format!("lp.objective[{j}]"), "non-finite"));
        }
        for (j, (lo, hi)) in self.var_bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::validation(
                    format!("lp.var_bounds[{j}]"),
                    format!("invalid bounds [{lo}, {hi}]"),
                ));
            }
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(Error::dims(format!("lp.constraints[{i}]"), n, row.coeffs.len()));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(Error::validation(format!("lp.constraints[{i}]"), "non-finite"));
            }
        }
        Ok(())
    }

    /// Largest bound or row violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = self
            .var_bounds
            .iter()
            .zip(x)
            .map(|((lo, hi), v)| (lo - v).max(v - hi).max(0.0));
        let rows = self.constraints.iter().map(|c| c.violation(x));
        bounds.chain(rows).fold(0.0, f64::max)
    }
}

/// Plain-text listing, used for debug dumps.
impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn terms(coeffs: &[f64]) -> String {
            let parts: Vec<String> = coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(j, c)| format!("{c:+} x{j}"))
                .collect();
            if parts.is_empty() {
                "0".into()
            } else {
                parts.join(" ")
            }
        }
        writeln!(f, "maximize")?;
        writeln!(f, "  {}", terms(&self.objective))?;
        writeln!(f, "subject to")?;
        for (i, c) in self.constraints.iter().enumerate() {
            writeln!(f, "  r{i}: {} {} {}", terms(&c.coeffs), c.relation, c.rhs)?;
        }
        writeln!(f, "bounds")?;
        for (j, (lo, hi)) in self.var_bounds.iter().enumerate() {
            writeln!(f, "  {lo} <= x{j} <= {hi}")?;
        }
        writeln!(f, "end")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub point: Vec<f64>,
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
}

impl LpOutcome {
    pub fn optimal(&self) -> Option<&LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            LpOutcome::Infeasible => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

struct Simplex {
    n_struct: usize,
    /// Row `i` is row `i` of `B⁻¹·A`.
    tableau: Vec<Vec<f64>>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    artificials: Vec<usize>,
    pivots: usize,
}

impl Simplex {
    fn new(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let m = lp.constraints.len();

        // Normalize every row to `a·x (+ s) = b` with `s >= 0` for inequalities.
        let rows: Vec<(Vec<f64>, bool, f64)> = lp
            .constraints
            .iter()
            .map(|c| match c.relation {
                Relation::Le => (c.coeffs.clone(), true, c.rhs),
                Relation::Ge => (c.coeffs.iter().map(|a| -a).collect(), true, -c.rhs),
                Relation::Eq => (c.coeffs.clone(), false, c.rhs),
            })
            .collect();

        let x_struct: Vec<f64> = lp.var_bounds.iter().map(|b| b.0).collect();
        let residual: Vec<f64> = rows
            .iter()
            .map(|(a, _, b)| b - a.iter().zip(&x_struct).map(|(c, v)| c * v).sum::<f64>())
            .collect();

        let n_slack = rows.iter().filter(|r| r.1).count();
        let needs_art: Vec<bool> = rows
            .iter()
            .zip(&residual)
            .map(|((_, has_slack, _), r)| !has_slack || *r < 0.0)
            .collect();
        let n_art = needs_art.iter().filter(|b| **b).count();
        let ncols = n + n_slack + n_art;

        let mut lo = Vec::with_capacity(ncols);
        let mut hi = Vec::with_capacity(ncols);
        for (l, h) in &lp.var_bounds {
            lo.push(*l);
            hi.push(*h);
        }
        lo.resize(ncols, 0.0);
        hi.resize(ncols, f64::INFINITY);

        let mut x = x_struct;
        x.resize(ncols, 0.0);
        let mut state = vec![VarState::AtLower; ncols];
        let mut tableau = vec![vec![0.0; ncols]; m];
        let mut basis = vec![0; m];
        let mut artificials = Vec::with_capacity(n_art);

        let mut next_slack = n;
        let mut next_art = n + n_slack;
        for (i, (a, has_slack, _)) in rows.iter().enumerate() {
            let row = &mut tableau[i];
            row[..n].copy_from_slice(a);
            let slack = if *has_slack {
                row[next_slack] = 1.0;
                next_slack += 1;
                Some(next_slack - 1)
            } else {
                None
            };
            if needs_art[i] {
                let col = next_art;
                next_art += 1;
                let sigma = if residual[i] >= 0.0 { 1.0 } else { -1.0 };
                row[col] = sigma;
                if sigma < 0.0 {
                    row.iter_mut().for_each(|v| *v = -*v);
                }
                basis[i] = col;
                state[col] = VarState::Basic;
                x[col] = residual[i].abs();
                artificials.push(col);
            } else {
                let s = slack.expect("inequality rows carry a slack");
                basis[i] = s;
                state[s] = VarState::Basic;
                x[s] = residual[i];
            }
        }

        Simplex {
            n_struct: n,
            tableau,
            basis,
            state,
            lo,
            hi,
            x,
            artificials,
            pivots: 0,
        }
    }

    fn ncols(&self) -> usize {
        self.x.len()
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (row, &b) in self.tableau.iter().zip(&self.basis) {
            let cb = cost[b];
            if cb != 0.0 {
                for (dj, t) in d.iter_mut().zip(row) {
                    *dj -= cb * t;
                }
            }
        }
        for &b in &self.basis {
            d[b] = 0.0;
        }
        d
    }

    fn entering(&self, d: &[f64]) -> Option<usize> {
        (0..self.ncols()).find(|&j| {
            if self.lo[j] == self.hi[j] {
                return false;
            }
            match self.state[j] {
                VarState::Basic => false,
                VarState::AtLower => d[j] > OPT_TOL,
                VarState::AtUpper => d[j] < -OPT_TOL,
            }
        })
    }

    fn run(&mut self, cost: &[f64]) -> Result<()> {
        let mut d = self.reduced_costs(cost);
        let mut since_refresh = 0;
        loop {
            let q = match self.entering(&d) {
                Some(q) => q,
                None => {
                    if since_refresh == 0 {
                        return Ok(());
                    }
                    // confirm optimality against freshly computed reduced costs
                    d = self.reduced_costs(cost);
                    since_refresh = 0;
                    continue;
                }
            };
            if self.pivots >= PIVOT_LIMIT {
                return Err(Error::Numerical(format!(
                    "simplex pivot limit ({PIVOT_LIMIT}) reached"
                )));
            }
            self.pivots += 1;
            since_refresh += 1;

            let dir = if self.state[q] == VarState::AtLower { 1.0 } else { -1.0 };
            let mut theta = self.hi[q] - self.lo[q];
            let mut leave: Option<usize> = None;
            for (i, row) in self.tableau.iter().enumerate() {
                let alpha = row[q] * dir;
                let b = self.basis[i];
                let lim = if alpha > PIVOT_TOL {
                    (self.x[b] - self.lo[b]) / alpha
                } else if alpha < -PIVOT_TOL && self.hi[b].is_finite() {
                    (self.hi[b] - self.x[b]) / -alpha
                } else {
                    continue;
                };
                let lim = lim.max(0.0);
                let better = match leave {
                    _ if lim < theta - RATIO_TIE_TOL => true,
                    Some(r) if lim <= theta + RATIO_TIE_TOL => b < self.basis[r],
                    _ => false,
                };
                if better {
                    theta = lim.min(theta);
                    leave = Some(i);
                }
            }
            if !theta.is_finite() {
                return Err(Error::Numerical("unbounded ray in a bounded LP".into()));
            }

            self.x[q] += dir * theta;
            for (i, row) in self.tableau.iter().enumerate() {
                let b = self.basis[i];
                self.x[b] -= row[q] * dir * theta;
            }

            match leave {
                None => {
                    self.state[q] = if dir > 0.0 {
                        self.x[q] = self.hi[q];
                        VarState::AtUpper
                    } else {
                        self.x[q] = self.lo[q];
                        VarState::AtLower
                    };
                }
                Some(r) => {
                    let l = self.basis[r];
                    if self.tableau[r][q] * dir > 0.0 {
                        self.x[l] = self.lo[l];
                        self.state[l] = VarState::AtLower;
                    } else {
                        self.x[l] = self.hi[l];
                        self.state[l] = VarState::AtUpper;
                    }
                    self.pivot(r, q, &mut d);
                }
            }
            if since_refresh >= REFRESH_EVERY {
                d = self.reduced_costs(cost);
                since_refresh = 0;
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize, d: &mut [f64]) {
        let inv = 1.0 / self.tableau[r][q];
        let pivot_row: Vec<f64> = self.tableau[r].iter().map(|v| v * inv).collect();
        for (i, row) in self.tableau.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[q];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                row[q] = 0.0;
            }
        }
        let dq = d[q];
        if dq != 0.0 {
            for (v, p) in d.iter_mut().zip(&pivot_row) {
                *v -= dq * p;
            }
        }
        d[q] = 0.0;
        self.tableau[r] = pivot_row;
        self.tableau[r][q] = 1.0;
        self.basis[r] = q;
        self.state[q] = VarState::Basic;
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome> {
    lp.validate()?;
    let mut sx = Simplex::new(lp);

    if !sx.artificials.is_empty() {
        let mut cost = vec![0.0; sx.ncols()];
        for &a in &sx.artificials {
            cost[a] = -1.0;
        }
        sx.run(&cost)?;
        let infeasibility: f64 = sx.artificials.iter().map(|&a| sx.x[a]).sum();
        if infeasibility > FEAS_TOL {
            return Ok(LpOutcome::Infeasible);
        }
        // pin artificials to zero; basic ones stay in the basis at zero
        for &a in &sx.artificials.clone() {
            sx.hi[a] = 0.0;
            if sx.state[a] != VarState::Basic {
                sx.x[a] = 0.0;
                sx.state[a] = VarState::AtLower;
            }
        }
    }

    let mut cost = vec![0.0; sx.ncols()];
    cost[..sx.n_struct].copy_from_slice(&lp.objective);
    sx.run(&cost)?;

    let point: Vec<f64> = sx.x[..sx.n_struct]
        .iter()
        .zip(&lp.var_bounds)
        .map(|(v, (l, h))| v.clamp(*l, *h))
        .collect();
    let violation = lp.max_violation(&point);
    if violation > FEAS_TOL {
        return Err(Error::Numerical(format!(
            "simplex solution violates constraints by {violation:e}"
        )));
    }
    let value = lp.objective.iter().zip(&point).map(|(c, v)| c * v).sum();
    Ok(LpOutcome::Optimal(LpSolution {
        value,
        point,
        pivots: sx.pivots,
    }))
}
