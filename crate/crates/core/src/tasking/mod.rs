//! Lower-level tasking: which target each observer looks at on each step.

mod maxmin;
mod simplex;

use std::io::{Read, Write};
use std::time::Instant;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::InfoTensor;

pub use maxmin::{solve_maxmin, MaxMinSettings};
pub use simplex::{solve_lp, LpSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    /// Total information over all targets.
    #[default]
    Max,
    /// Information of the least-observed target.
    MaxMin,
}

impl ObjectiveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveKind::Max => "max",
            ObjectiveKind::MaxMin => "maxmin",
        }
    }
}

impl std::str::FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(ObjectiveKind::Max),
            "maxmin" => Ok(ObjectiveKind::MaxMin),
            other => Err(Error::InvalidSettings(format!("unknown objective '{other}'"))),
        }
    }
}

/// A tasking schedule. Each `(observer, step)` slot holds at most one target,
/// so the one-target-per-slot constraint holds by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlTensor {
    observers: usize,
    targets: usize,
    steps: usize,
    slots: Vec<Option<usize>>,
}

impl ControlTensor {
    /// The all-zero schedule.
    pub fn empty(observers: usize, targets: usize, steps: usize) -> Self {
        Self { observers, targets, steps, slots: vec![None; observers * steps] }
    }

    /// Builds a schedule from binary indicators laid out as
    /// `u[(i * N + j) * L + k]`.
    pub fn from_indicators(
        observers: usize,
        targets: usize,
        steps: usize,
        indicators: &[u8],
    ) -> Result<Self> {
        if indicators.len() != observers * targets * steps {
            return Err(Error::Shape(format!(
                "{} indicators for a {observers}x{targets}x{steps} control",
                indicators.len()
            )));
        }
        let mut u = Self::empty(observers, targets, steps);
        for i in 0..observers {
            for k in 0..steps {
                let mut count = 0;
                for j in 0..targets {
                    match indicators[(i * targets + j) * steps + k] {
                        0 => {}
                        1 => {
                            count += 1;
                            u.slots[i * steps + k] = Some(j);
                        }
                        v => return Err(Error::Shape(format!("indicator value {v} is not 0 or 1"))),
                    }
                }
                if count > 1 {
                    return Err(Error::InfeasibleControl { observer: i, step: k, count });
                }
            }
        }
        Ok(u)
    }

    pub fn observers(&self) -> usize {
        self.observers
    }

    pub fn targets(&self) -> usize {
        self.targets
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.observers, self.targets, self.steps)
    }

    /// Target assigned to observer `i` at step `k`, if any.
    pub fn assignment(&self, i: usize, k: usize) -> Option<usize> {
        self.slots[i * self.steps + k]
    }

    pub fn assign(&mut self, i: usize, k: usize, target: Option<usize>) {
        if let Some(j) = target {
            assert!(j < self.targets, "target {j} out of range");
        }
        self.slots[i * self.steps + k] = target;
    }

    /// `u[i, j, k]`.
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.assignment(i, k) == Some(j)
    }

    pub fn to_indicators(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.observers * self.targets * self.steps];
        for i in 0..self.observers {
            for k in 0..self.steps {
                if let Some(j) = self.assignment(i, k) {
                    out[(i * self.targets + j) * self.steps + k] = 1;
                }
            }
        }
        out
    }

    pub fn assigned_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    /// Single-observer slice `u[i, :, :]`.
    pub fn observer_slice(&self, i: usize) -> ControlTensor {
        let slots = self.slots[i * self.steps..(i + 1) * self.steps].to_vec();
        ControlTensor { observers: 1, targets: self.targets, steps: self.steps, slots }
    }

    /// Stacks single-observer schedules.
    pub fn stack(parts: &[ControlTensor]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Ok(Self::empty(0, 0, 0));
        };
        let (targets, steps) = (first.targets, first.steps);
        let mut slots = Vec::new();
        let mut observers = 0;
        for p in parts {
            if p.targets != targets || p.steps != steps {
                return Err(Error::Shape("stacked controls disagree on targets or steps".into()));
            }
            observers += p.observers;
            slots.extend_from_slice(&p.slots);
        }
        Ok(Self { observers, targets, steps, slots })
    }

    /// Number of `(observer, step)` slots whose assignment differs.
    pub fn differing_slots(&self, other: &ControlTensor) -> usize {
        self.slots.iter().zip(&other.slots).filter(|(a, b)| a != b).count()
    }

    /// Writes `step,observer,target` rows for assigned slots, ordered by step
    /// then observer.
    pub fn write_schedule_csv<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(b"step,observer,target\n")?;
        for k in 0..self.steps {
            for i in 0..self.observers {
                if let Some(j) = self.assignment(i, k) {
                    writeln!(out, "{k},{i},{j}")?;
                }
            }
        }
        Ok(())
    }

    /// Reads a schedule written by [`ControlTensor::write_schedule_csv`].
    pub fn read_schedule_csv<R: Read>(
        source: R,
        observers: usize,
        targets: usize,
        steps: usize,
    ) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
        let header = reader
            .headers()
            .map_err(|e| Error::ScheduleParse { row: 1, message: e.to_string() })?;
        if header.iter().collect::<Vec<_>>() != ["step", "observer", "target"] {
            return Err(Error::ScheduleParse {
                row: 1,
                message: "header must be step,observer,target".into(),
            });
        }
        let mut u = Self::empty(observers, targets, steps);
        let mut counts = vec![0usize; observers * steps];
        for (n, record) in reader.records().enumerate() {
            let row = n + 2;
            let record = record.map_err(|e| Error::ScheduleParse { row, message: e.to_string() })?;
            if record.len() != 3 {
                return Err(Error::ScheduleParse { row, message: format!("expected 3 fields, got {}", record.len()) });
            }
            let field = |idx: usize, bound: usize, name: &str| -> Result<usize> {
                let v: usize = record[idx].parse().map_err(|_| Error::ScheduleParse {
                    row,
                    message: format!("{name} '{}' is not an index", &record[idx]),
                })?;
                if v >= bound {
                    return Err(Error::ScheduleParse { row, message: format!("{name} {v} out of range") });
                }
                Ok(v)
            };
            let k = field(0, steps, "step")?;
            let i = field(1, observers, "observer")?;
            let j = field(2, targets, "target")?;
            counts[i * steps + k] += 1;
            if counts[i * steps + k] > 1 {
                return Err(Error::InfeasibleControl { observer: i, step: k, count: counts[i * steps + k] });
            }
            u.assign(i, k, Some(j));
        }
        Ok(u)
    }
}

/// Solver bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverStats {
    /// Branch-and-bound nodes evaluated.
    pub nodes: usize,
    /// Restricted-master LP solves.
    pub lp_iterations: usize,
    pub wall_time: f64,
    /// Best upper bound on the optimum.
    pub bound: f64,
    /// `(bound − objective) / objective`, or 0 when both are 0.
    pub gap: f64,
    /// The node budget ran out before the gap closed.
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskingSolution {
    pub control: ControlTensor,
    pub objective: f64,
    pub per_target_info: Vec<f64>,
    pub stats: SolverStats,
}

fn check_shape(a: &InfoTensor, u: &ControlTensor) -> Result<()> {
    if a.shape() != u.shape() {
        return Err(Error::Shape(format!("tensor {:?} vs control {:?}", a.shape(), u.shape())));
    }
    Ok(())
}

/// `∑_{i,k} u[i,j,k] A[i,j,k]` for every target `j`.
pub fn per_target_info(a: &InfoTensor, u: &ControlTensor) -> Result<Vec<f64>> {
    check_shape(a, u)?;
    let mut out = vec![0.0; a.targets()];
    for i in 0..a.observers() {
        for k in 0..a.steps() {
            if let Some(j) = u.assignment(i, k) {
                out[j] += a.get(i, j, k);
            }
        }
    }
    Ok(out)
}

fn objective_of(per_target: &[f64], kind: ObjectiveKind) -> f64 {
    match kind {
        ObjectiveKind::Max => per_target.iter().sum(),
        ObjectiveKind::MaxMin => per_target.iter().copied().reduce(f64::min).unwrap_or(0.0),
    }
}

/// Objective value of schedule `u` on `A`.
pub fn evaluate_control(a: &InfoTensor, u: &ControlTensor, kind: ObjectiveKind) -> Result<f64> {
    Ok(objective_of(&per_target_info(a, u)?, kind))
}

pub(crate) fn solution(a: &InfoTensor, control: ControlTensor, kind: ObjectiveKind, stats: SolverStats) -> TaskingSolution {
    let per_target_info = per_target_info(a, &control).expect("solver produced a mismatched control");
    let objective = objective_of(&per_target_info, kind);
    TaskingSolution { control, objective, per_target_info, stats }
}

/// Cumulative-information tasking: each slot looks at its most informative
/// target, ties to the lowest index.
pub fn solve_max(a: &InfoTensor) -> TaskingSolution {
    let start = Instant::now();
    let (m, n, l) = a.shape();
    let mut u = ControlTensor::empty(m, n, l);
    for i in 0..m {
        for k in 0..l {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..n {
                let v = a.get(i, j, k);
                if best.map_or(true, |(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            u.assign(i, k, best.map(|(j, _)| j));
        }
    }
    let mut sol = solution(a, u, ObjectiveKind::Max, SolverStats::default());
    sol.stats.bound = sol.objective;
    sol.stats.wall_time = start.elapsed().as_secs_f64();
    sol
}

/// Dispatches to [`solve_max`] or [`solve_maxmin`].
pub fn solve(a: &InfoTensor, kind: ObjectiveKind, settings: &MaxMinSettings) -> Result<TaskingSolution> {
    match kind {
        ObjectiveKind::Max => Ok(solve_max(a)),
        ObjectiveKind::MaxMin => solve_maxmin(a, settings),
    }
}

/// Nearest-target tasking from observer and target positions, indexed
/// `[observer][step]` and `[target][step]`. Ties go to the lowest index.
pub fn myopic_policy(observers: &[Vec<Vector3<f64>>], targets: &[Vec<Vector3<f64>>]) -> ControlTensor {
    let steps = observers.first().or(targets.first()).map_or(0, |v| v.len());
    let mut u = ControlTensor::empty(observers.len(), targets.len(), steps);
    for (i, obs) in observers.iter().enumerate() {
        for (k, r) in obs.iter().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            for (j, tgt) in targets.iter().enumerate() {
                let d = (tgt[k] - r).norm();
                if best.map_or(true, |(_, b)| d < b) {
                    best = Some((j, d));
                }
            }
            u.assign(i, k, best.map(|(j, _)| j));
        }
    }
    u
}

/// `(1/P) ∑ (f_opt − f_myop) / f_opt`.
pub fn relative_optimality_gap(f_opt: &[f64], f_myop: &[f64]) -> Result<f64> {
    if f_opt.len() != f_myop.len() || f_opt.is_empty() {
        return Err(Error::Shape(format!(
            "gap needs equal nonempty inputs, got {} and {}",
            f_opt.len(),
            f_myop.len()
        )));
    }
    let mut sum = 0.0;
    for (index, (&o, &m)) in f_opt.iter().zip(f_myop).enumerate() {
        if !(o > 0.0) {
            return Err(Error::NonPositiveObjective { index, value: o });
        }
        sum += (o - m) / o;
    }
    Ok(sum / f_opt.len() as f64)
}

/// Fraction of assigned slots given to each target.
pub fn observation_budget(u: &ControlTensor) -> Vec<f64> {
    let mut counts = vec![0usize; u.targets()];
    for slot in u.slots.iter().flatten() {
        counts[*slot] += 1;
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return vec![0.0; u.targets()];
    }
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

#[cfg(test)]
pub(crate) mod brute {
    use super::*;

    /// Best objective over every feasible control, by enumeration.
    pub fn best(a: &InfoTensor, kind: ObjectiveKind) -> f64 {
        let (m, n, l) = a.shape();
        let slots = m * l;
        let mut choice = vec![0usize; slots];
        let mut best = f64::NEG_INFINITY;
        loop {
            let mut u = ControlTensor::empty(m, n, l);
            for (s, &c) in choice.iter().enumerate() {
                u.assign(s / l, s % l, if c == 0 { None } else { Some(c - 1) });
            }
            best = best.max(evaluate_control(a, &u, kind).unwrap());
            let mut s = 0;
            loop {
                if s == slots {
                    return best;
                }
                choice[s] += 1;
                if choice[s] <= n {
                    break;
                }
                choice[s] = 0;
                s += 1;
            }
        }
    }
}
