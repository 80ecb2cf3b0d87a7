//! Exact max-min tasking by branch-and-bound.
//!
//! The LP relaxation keeps `u ∈ [0, 1]` and the epigraph variable `t`. Because
//! the only coupling between `(observer, step)` slots is through the `N`
//! epigraph rows, the relaxation is solved by column generation: every column
//! is a complete integer schedule, the restricted master picks a convex
//! combination maximizing `t`, and pricing assigns each slot to its best
//! target under the master duals. Each pricing pass also yields a valid upper
//! bound `g(λ) = ∑_s max_j λ_j A[s, j]`, and every column is a feasible
//! schedule, so nodes can be pruned before the relaxation converges.
//!
//! Branching takes the most fractional `u[s, j]`: one child restricts slot
//! `s` to target `j`, the other forbids `j` there.

use std::collections::HashSet;
use std::time::Instant;

use super::simplex::solve_lp;
use super::{solution, ControlTensor, ObjectiveKind, SolverStats, TaskingSolution};
use crate::error::{Error, Result};
use crate::observation::InfoTensor;

const IDLE: u32 = u32::MAX;
const MAX_CG_ITERATIONS: usize = 2_000;
const COLUMN_CAP: usize = 64;
const ABS_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxMinSettings {
    /// Relative optimality tolerance.
    pub gap_tol: f64,
    pub node_budget: usize,
}

impl Default for MaxMinSettings {
    fn default() -> Self {
        Self { gap_tol: 1e-9, node_budget: 1_000_000 }
    }
}

/// Coefficients with `S = M·L` slots, stored slot-major and scaled to a unit
/// maximum.
struct Problem {
    slots: usize,
    targets: usize,
    a: Vec<f64>,
}

impl Problem {
    fn new(tensor: &InfoTensor, scale: f64) -> Self {
        let (m, n, l) = tensor.shape();
        let mut a = vec![0.0; m * l * n];
        for i in 0..m {
            for j in 0..n {
                for k in 0..l {
                    a[(i * l + k) * n + j] = tensor.get(i, j, k) / scale;
                }
            }
        }
        Self { slots: m * l, targets: n, a }
    }

    #[inline]
    fn coef(&self, s: usize, j: usize) -> f64 {
        self.a[s * self.targets + j]
    }

    fn totals(&self, assign: &[u32]) -> Vec<f64> {
        let mut t = vec![0.0; self.targets];
        for (s, &j) in assign.iter().enumerate() {
            if j != IDLE {
                t[j as usize] += self.coef(s, j as usize);
            }
        }
        t
    }

    /// Best allowed target per slot under weights `lam`, and `g(λ)`.
    fn price(&self, allowed: &[bool], lam: &[f64]) -> (Vec<u32>, f64) {
        let n = self.targets;
        let mut assign = vec![IDLE; self.slots];
        let mut g = 0.0;
        for (s, slot) in assign.iter_mut().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..n {
                if allowed[s * n + j] {
                    let v = lam[j] * self.coef(s, j);
                    if best.is_none() || v > best.unwrap().1 {
                        best = Some((j, v));
                    }
                }
            }
            if let Some((j, v)) = best {
                *slot = j as u32;
                g += v;
            }
        }
        (assign, g)
    }

    /// Local search in leximin order: single-slot moves and exchanges of
    /// two slots between the poorest target and another one.
    fn improve(&self, allowed: &[bool], assign: &mut [u32], exchanges: bool) {
        let n = self.targets;
        let mut totals = self.totals(assign);
        let mut key = leximin_key(&totals);
        let mut scratch = totals.clone();
        for _ in 0..8 * self.slots + 8 {
            let jmin = argmin(&totals).0;
            // (slot, new target, optional (slot, new target), key)
            let mut best: Option<(usize, u32, Option<(usize, u32)>, Vec<f64>)> = None;
            let consider = |moves: (usize, u32, Option<(usize, u32)>), t: &[f64], best: &mut Option<_>| {
                let k = leximin_key(t);
                let incumbent = best.as_ref().map_or(&key, |b: &(usize, u32, Option<(usize, u32)>, Vec<f64>)| &b.3);
                if leximin_better(&k, incumbent) {
                    *best = Some((moves.0, moves.1, moves.2, k));
                }
            };
            for s in 0..self.slots {
                let old = assign[s];
                if old == jmin as u32 || !allowed[s * n + jmin] {
                    continue;
                }
                scratch.copy_from_slice(&totals);
                if old != IDLE {
                    scratch[old as usize] -= self.coef(s, old as usize);
                }
                scratch[jmin] += self.coef(s, jmin);
                consider((s, jmin as u32, None), &scratch, &mut best);
                if !exchanges || old == IDLE {
                    continue;
                }
                let a = old as usize;
                for s2 in 0..self.slots {
                    if assign[s2] != jmin as u32 || !allowed[s2 * n + a] {
                        continue;
                    }
                    let mut t = scratch.clone();
                    t[jmin] -= self.coef(s2, jmin);
                    t[a] += self.coef(s2, a);
                    consider((s, jmin as u32, Some((s2, old))), &t, &mut best);
                }
            }
            let Some((s, j, pair, k)) = best else { break };
            self.apply(assign, &mut totals, s, j);
            if let Some((s2, j2)) = pair {
                self.apply(assign, &mut totals, s2, j2);
            }
            key = k;
        }
    }

    fn apply(&self, assign: &mut [u32], totals: &mut [f64], s: usize, j: u32) {
        let old = assign[s];
        if old != IDLE {
            totals[old as usize] -= self.coef(s, old as usize);
        }
        totals[j as usize] += self.coef(s, j as usize);
        assign[s] = j;
    }
}

fn leximin_key(totals: &[f64]) -> Vec<f64> {
    let mut k = totals.to_vec();
    k.sort_by(f64::total_cmp);
    k
}

/// Strictly better in leximin order, ignoring roundoff-level differences.
fn leximin_better(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x > &(y + ABS_EPS * 1e-3) {
            return true;
        }
        if x < &(y - ABS_EPS * 1e-3) {
            return false;
        }
    }
    false
}

fn argmin(v: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, &x) in v.iter().enumerate() {
        if x < best.1 {
            best = (j, x);
        }
    }
    best
}

#[derive(Clone)]
struct Column {
    assign: Vec<u32>,
    totals: Vec<f64>,
}

impl Column {
    fn new(problem: &Problem, assign: Vec<u32>) -> Self {
        let totals = problem.totals(&assign);
        Self { assign, totals }
    }

    fn value(&self) -> f64 {
        self.totals.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

struct Incumbent {
    value: f64,
    assign: Vec<u32>,
}

impl Incumbent {
    fn offer(&mut self, value: f64, assign: &[u32]) {
        if value > self.value {
            self.value = value;
            self.assign = assign.to_vec();
        }
    }
}

struct Node {
    allowed: Vec<bool>,
    columns: Vec<Column>,
    bound: f64,
    branch: Option<(usize, usize)>,
}

struct Search<'a> {
    problem: &'a Problem,
    gap_tol: f64,
    incumbent: Incumbent,
    lp_solves: usize,
}

impl Search<'_> {
    fn threshold(&self) -> f64 {
        let v = self.incumbent.value.max(0.0);
        v + self.gap_tol * v + ABS_EPS
    }

    fn offer(&mut self, assign: &[u32]) {
        let value = argmin(&self.problem.totals(assign)).1;
        self.incumbent.offer(value, assign);
    }

    /// Makes an inherited column consistent with the node's restrictions.
    fn repair(&self, allowed: &[bool], mut assign: Vec<u32>) -> Vec<u32> {
        let n = self.problem.targets;
        for (s, slot) in assign.iter_mut().enumerate() {
            let ok = *slot != IDLE && allowed[s * n + *slot as usize];
            if ok {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..n {
                if allowed[s * n + j] {
                    let v = self.problem.coef(s, j);
                    if best.is_none() || v > best.unwrap().1 {
                        best = Some((j, v));
                    }
                }
            }
            *slot = best.map_or(IDLE, |(j, _)| j as u32);
        }
        assign
    }

    fn evaluate(&mut self, allowed: Vec<bool>, inherited: &[Column]) -> Result<Node> {
        let problem = self.problem;
        let n = problem.targets;
        let mut seen = HashSet::new();
        let mut columns = Vec::new();
        for c in inherited {
            let a = self.repair(&allowed, c.assign.clone());
            self.add_column(&mut seen, &mut columns, a);
        }
        if columns.is_empty() {
            let uniform = vec![1.0 / n as f64; n];
            self.add_column(&mut seen, &mut columns, problem.price(&allowed, &uniform).0);
            for j in 0..n {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                self.add_column(&mut seen, &mut columns, problem.price(&allowed, &e).0);
            }
        }

        let mut upper = f64::INFINITY;
        let mut weights;
        let mut lp_value;
        let mut iterations = 0;
        loop {
            iterations += 1;
            let master = self.solve_master(&columns)?;
            lp_value = master.0;
            weights = master.1;
            let duals = master.2;
            let y0 = duals[n];
            let ysum: f64 = duals[..n].iter().sum();
            let lam: Vec<f64> = if ysum > 1e-15 {
                duals[..n].iter().map(|y| y / ysum).collect()
            } else {
                vec![1.0 / n as f64; n]
            };
            let (assign, g) = problem.price(&allowed, &lam);
            upper = upper.min(g);
            let reduced = ysum * g - y0;
            let fresh = self.add_column(&mut seen, &mut columns, assign);
            let tol = 1e-11 * upper.abs().max(1.0);
            if upper <= self.threshold() {
                return Ok(Node { allowed, columns, bound: upper, branch: None });
            }
            if reduced <= tol || !fresh {
                // No improving column: the master value is the relaxation value.
                upper = upper.min(lp_value);
                break;
            }
            if upper - lp_value <= tol {
                break;
            }
            if iterations >= MAX_CG_ITERATIONS {
                break;
            }
        }
        // Re-solve so the weights cover every column including the last one.
        let master = self.solve_master(&columns)?;
        if master.0 >= lp_value {
            weights = master.1;
        }

        // Fractional assignment implied by the master weights.
        let total: f64 = weights.iter().sum();
        let active: Vec<(usize, f64)> = weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 1e-12)
            .map(|(c, &w)| (c, w / total))
            .collect();
        let mut frac = vec![0.0; problem.slots * n];
        for &(c, w) in &active {
            for (s, &j) in columns[c].assign.iter().enumerate() {
                if j != IDLE {
                    frac[s * n + j as usize] += w;
                }
            }
        }
        let mut rounded = vec![IDLE; problem.slots];
        let mut branch: Option<(usize, usize, f64)> = None;
        for s in 0..problem.slots {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..n {
                let u = frac[s * n + j];
                if u > 1e-12 && (best.is_none() || u > best.unwrap().1) {
                    best = Some((j, u));
                }
                let f = u.min(1.0 - u);
                if f > 1e-9 && (branch.is_none() || f > branch.unwrap().2) {
                    branch = Some((s, j, f));
                }
            }
            rounded[s] = best.map_or(IDLE, |(j, _)| j as u32);
        }
        let mut rounded = self.repair(&allowed, rounded);
        problem.improve(&allowed, &mut rounded, false);
        self.offer(&rounded);

        // Children inherit the active columns first.
        let mut keep: Vec<Column> = active.iter().map(|&(c, _)| columns[c].clone()).collect();
        for (c, col) in columns.iter().enumerate().rev() {
            if keep.len() >= COLUMN_CAP {
                break;
            }
            if !active.iter().any(|&(a, _)| a == c) {
                keep.push(col.clone());
            }
        }
        Ok(Node { allowed, columns: keep, bound: upper, branch: branch.map(|(s, j, _)| (s, j)) })
    }

    fn add_column(&mut self, seen: &mut HashSet<Vec<u32>>, columns: &mut Vec<Column>, assign: Vec<u32>) -> bool {
        if !seen.insert(assign.clone()) {
            return false;
        }
        let col = Column::new(self.problem, assign);
        self.incumbent.offer(col.value(), &col.assign);
        columns.push(col);
        true
    }

    /// Restricted master: `max t` s.t. `t ≤ ∑_c w_c a_j(c)` for every target
    /// and `∑_c w_c ≤ 1`. Returns the value, weights and row duals.
    fn solve_master(&mut self, columns: &[Column]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let n = self.problem.targets;
        let vars = columns.len() + 1;
        let mut c = vec![0.0; vars];
        c[0] = 1.0;
        let mut a = vec![0.0; (n + 1) * vars];
        for j in 0..n {
            a[j * vars] = 1.0;
            for (ci, col) in columns.iter().enumerate() {
                a[j * vars + ci + 1] = -col.totals[j];
            }
        }
        for ci in 0..columns.len() {
            a[n * vars + ci + 1] = 1.0;
        }
        let mut b = vec![0.0; n + 1];
        b[n] = 1.0;
        let lp = solve_lp(&c, &a, &b)?;
        self.lp_solves += 1;
        Ok((lp.objective, lp.x[1..].to_vec(), lp.duals))
    }
}

/// Max-min tasking: maximizes the information of the least-observed target.
///
/// Returns the best schedule found. When the node budget runs out first,
/// `stats.budget_exhausted` is set and `stats.bound` holds the best remaining
/// upper bound.
pub fn solve_maxmin(tensor: &InfoTensor, settings: &MaxMinSettings) -> Result<TaskingSolution> {
    if !(settings.gap_tol >= 0.0) {
        return Err(Error::InvalidSettings(format!("gap_tol must be nonnegative, got {}", settings.gap_tol)));
    }
    let start = Instant::now();
    let (m, n, l) = tensor.shape();
    if n == 0 || m * l == 0 {
        let mut sol = solution(tensor, ControlTensor::empty(m, n, l), ObjectiveKind::MaxMin, SolverStats::default());
        sol.stats.wall_time = start.elapsed().as_secs_f64();
        return Ok(sol);
    }
    let scale = match tensor.max_entry() {
        s if s > 0.0 => s,
        _ => 1.0,
    };
    let problem = Problem::new(tensor, scale);
    let mut search = Search {
        problem: &problem,
        gap_tol: settings.gap_tol,
        incumbent: Incumbent { value: f64::NEG_INFINITY, assign: vec![IDLE; problem.slots] },
        lp_solves: 0,
    };

    let root = search.evaluate(vec![true; problem.slots * n], &[])?;
    let mut polished = search.incumbent.assign.clone();
    problem.improve(&root.allowed, &mut polished, true);
    search.offer(&polished);

    let mut nodes = 1;
    let mut closed_bound = f64::NEG_INFINITY;
    let mut stack = vec![root];
    let mut exhausted = false;
    while let Some(node) = stack.pop() {
        let Some((s, j)) = node.branch.filter(|_| node.bound > search.threshold()) else {
            closed_bound = closed_bound.max(node.bound);
            continue;
        };
        if nodes + 2 > settings.node_budget {
            stack.push(node);
            exhausted = true;
            break;
        }
        let mut fixed = node.allowed.clone();
        for jj in 0..n {
            fixed[s * n + jj] = jj == j;
        }
        let mut forbidden = node.allowed;
        forbidden[s * n + j] = false;
        let a = search.evaluate(fixed, &node.columns)?;
        let b = search.evaluate(forbidden, &node.columns)?;
        nodes += 2;
        let (low, high) = if a.bound > b.bound { (b, a) } else { (a, b) };
        stack.push(low);
        stack.push(high);
    }

    let incumbent = search.incumbent.value;
    let open = stack.iter().map(|nd| nd.bound).fold(f64::NEG_INFINITY, f64::max);
    let bound = if exhausted { open.max(incumbent) } else { closed_bound.min(search.threshold()).max(incumbent) };

    let mut control = ControlTensor::empty(m, n, l);
    for (slot, &j) in search.incumbent.assign.iter().enumerate() {
        control.assign(slot / l, slot % l, (j != IDLE).then_some(j as usize));
    }
    let mut sol = solution(tensor, control, ObjectiveKind::MaxMin, SolverStats::default());
    let bound = (bound * scale).max(sol.objective);
    sol.stats = SolverStats {
        nodes,
        lp_iterations: search.lp_solves,
        wall_time: start.elapsed().as_secs_f64(),
        bound,
        gap: if sol.objective > 0.0 { (bound - sol.objective) / sol.objective } else if bound > 0.0 { f64::INFINITY } else { 0.0 },
        budget_exhausted: exhausted,
    };
    Ok(sol)
}

/// LP relaxation value of the full compact model, solved directly.
#[cfg(test)]
pub(crate) fn compact_relaxation(tensor: &InfoTensor) -> f64 {
    let (m, n, l) = tensor.shape();
    let slots = m * l;
    let vars = slots * n + 1;
    let mut c = vec![0.0; vars];
    c[vars - 1] = 1.0;
    let rows = slots + n;
    let mut a = vec![0.0; rows * vars];
    for s in 0..slots {
        for j in 0..n {
            a[s * vars + s * n + j] = 1.0;
        }
    }
    for j in 0..n {
        let r = slots + j;
        a[r * vars + vars - 1] = 1.0;
        for s in 0..slots {
            a[r * vars + s * n + j] = -tensor.get(s / l, j, s % l);
        }
    }
    let mut b = vec![0.0; rows];
    b[..slots].fill(1.0);
    solve_lp(&c, &a, &b).unwrap().objective
}
