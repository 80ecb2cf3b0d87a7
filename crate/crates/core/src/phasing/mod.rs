//! Upper-level search over observer phases.
//!
//! The objective at a phase vector is obtained by assembling the information
//! tensor and solving the lower-level tasking problem. It is piecewise smooth
//! and periodic in every coordinate. Local search is a BFGS ascent with
//! central-difference gradients; perturbed phases wrap around, so a maximizer
//! at the seam of `[0, 1)` is reachable.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::catalog::{wrap_phase, PhaseVector};
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::observation::InfoTensor;
use crate::tasking::{solve, ControlTensor, MaxMinSettings, ObjectiveKind, TaskingSolution};

/// A scalar function of `dim()` periodic phases.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
}

/// Phases to information tensor to lower-level solve.
#[derive(Debug, Clone)]
pub struct BilevelObjective {
    env: Environment,
    kind: ObjectiveKind,
    maxmin: MaxMinSettings,
}

impl BilevelObjective {
    pub fn new(env: Environment, kind: ObjectiveKind, maxmin: MaxMinSettings) -> Self {
        Self { env, kind, maxmin }
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn maxmin_settings(&self) -> &MaxMinSettings {
        &self.maxmin
    }

    /// Tensor and lower-level solution at `x`.
    pub fn solve_at(&self, x: &[f64]) -> Result<(InfoTensor, TaskingSolution)> {
        if let Some(bad) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSettings(format!("phase {bad} is not finite")));
        }
        let phases = PhaseVector::new(x.to_vec())?;
        let tensor = self.env.build_info_tensor(&phases)?;
        let sol = solve(&tensor, self.kind, &self.maxmin)?;
        Ok((tensor, sol))
    }

    /// Upper-level objective at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if self.env.num_observers() == 0 {
            return Ok(0.0);
        }
        Ok(self.solve_at(x)?.1.objective)
    }
}

impl Objective for BilevelObjective {
    fn dim(&self) -> usize {
        self.env.num_observers()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.evaluate(x)
    }
}

/// Central-difference gradient with step `h`; perturbed phases wrap.
pub fn numerical_gradient<O: Objective + ?Sized>(obj: &O, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidSettings(format!("gradient step must be positive, got {h}")));
    }
    let mut g = vec![0.0; x.len()];
    let mut p = x.to_vec();
    for i in 0..x.len() {
        p[i] = wrap_phase(x[i] + h);
        let up = obj.value(&p)?;
        p[i] = wrap_phase(x[i] - h);
        let down = obj.value(&p)?;
        p[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    pub gradient_step: f64,
    pub grad_tol: f64,
    pub step_tol: f64,
    pub max_iterations: usize,
    /// Largest change of any phase in one iteration.
    pub max_step: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self { gradient_step: 1e-6, grad_tol: 1e-8, step_tol: 1e-10, max_iterations: 500, max_step: 0.05 }
    }
}

impl OptimizerSettings {
    fn validate(&self) -> Result<()> {
        let ok = self.gradient_step > 0.0
            && self.grad_tol >= 0.0
            && self.step_tol >= 0.0
            && self.max_step > 0.0
            && self.max_iterations > 0;
        if !ok {
            return Err(Error::InvalidSettings(format!("bad optimizer settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    Step,
    Iterations,
    /// Nothing to optimize.
    Trivial,
}

/// Outcome of one local search.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// Objective at every accepted iterate, starting with `x0`.
    pub trace: Vec<f64>,
}

struct Counted<'a, O: ?Sized> {
    inner: &'a O,
    count: AtomicUsize,
}

impl<O: Objective + ?Sized> Objective for Counted<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.count.fetch_add(1, Ordering::Relaxed);
        let v = self.inner.value(x)?;
        if !v.is_finite() {
            return Err(Error::NonFiniteObjective { x: x.to_vec() });
        }
        Ok(v)
    }
}

/// BFGS ascent from `x0` with Armijo backtracking.
///
/// When `f(x0) > 0` the search runs on `ln f`, which evens out the scale of
/// the landscape; accepted iterates never decrease `f` either way.
pub fn local_search<O: Objective + ?Sized>(obj: &O, x0: &[f64], settings: &OptimizerSettings) -> Result<LocalResult> {
    settings.validate()?;
    let n = obj.dim();
    if x0.len() != n {
        return Err(Error::Shape(format!("{} start phases for {n} observers", x0.len())));
    }
    let counted = Counted { inner: obj, count: AtomicUsize::new(0) };
    let mut x: Vec<f64> = x0.iter().map(|&v| wrap_phase(v)).collect();
    let f0 = counted.value(&x)?;
    if n == 0 {
        return Ok(LocalResult {
            x,
            objective: f0,
            iterations: 0,
            evaluations: 1,
            termination: Termination::Trivial,
            trace: vec![f0],
        });
    }
    let use_log = f0 > 0.0;
    let phi = |f: f64| if use_log { f.ln() } else { f };
    let grad = |x: &[f64], f: f64| -> Result<DVector<f64>> {
        let g = numerical_gradient(&counted, x, settings.gradient_step)?;
        let scale = if use_log { 1.0 / f } else { 1.0 };
        Ok(DVector::from_iterator(n, g.into_iter().map(|v| v * scale)))
    };

    let mut f = f0;
    let mut g = grad(&x, f)?;
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut first = true;
    let mut trace = vec![f];
    let mut iterations = 0;
    let termination = loop {
        if g.amax() < settings.grad_tol {
            break Termination::Gradient;
        }
        if iterations >= settings.max_iterations {
            break Termination::Iterations;
        }
        iterations += 1;
        let mut d = &hinv * &g;
        if g.dot(&d) <= 0.0 {
            hinv = DMatrix::identity(n, n);
            d = g.clone();
        }
        let dmax = d.amax();
        if dmax > settings.max_step {
            d *= settings.max_step / dmax;
        }
        let slope = g.dot(&d);
        let base = phi(f);
        let mut alpha = 1.0;
        let accepted = loop {
            if alpha * d.amax() < settings.step_tol {
                break None;
            }
            let trial: Vec<f64> = x.iter().zip(d.iter()).map(|(xi, di)| wrap_phase(xi + alpha * di)).collect();
            let ft = counted.value(&trial)?;
            let ok = if use_log { ft > 0.0 && phi(ft) >= base + 1e-4 * alpha * slope } else { ft >= base + 1e-4 * alpha * slope };
            if ok && ft >= f {
                break Some((trial, ft, alpha));
            }
            alpha *= 0.5;
        };
        let Some((x_new, f_new, alpha)) = accepted else {
            break Termination::Step;
        };
        let g_new = grad(&x_new, f_new)?;
        // Curvature pair for the minimization of −φ, in unwrapped coordinates.
        let s = &d * alpha;
        let y = -(&g_new - &g);
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if first {
                hinv = DMatrix::identity(n, n) * (sy / y.dot(&y));
                first = false;
            }
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let left = &eye - rho * &s * y.transpose();
            let right = &eye - rho * &y * s.transpose();
            hinv = &left * &hinv * &right + rho * &s * s.transpose();
        }
        x = x_new;
        f = f_new;
        g = g_new;
        trace.push(f);
        if s.amax() < settings.step_tol {
            break Termination::Step;
        }
    };
    Ok(LocalResult {
        x,
        objective: f,
        iterations,
        evaluations: counted.count.load(Ordering::Relaxed),
        termination,
        trace,
    })
}

/// One start of a multi-start search.
#[derive(Debug, Clone, PartialEq)]
pub struct StartRecord {
    /// Observer indices the start optimized (all observers for a joint start).
    pub observers: Vec<usize>,
    pub x0: Vec<f64>,
    pub outcome: std::result::Result<LocalResult, String>,
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub x_star: PhaseVector,
    pub objective: f64,
    /// Natural log of the objective.
    pub log_objective: f64,
    pub control: ControlTensor,
    pub per_target_info: Vec<f64>,
    pub wall_time: f64,
    pub evaluations: usize,
    pub starts: Vec<StartRecord>,
    /// Set when the method is not exact for the objective (greedy on maxmin).
    pub heuristic: bool,
    /// The final lower-level solve hit its node budget.
    pub budget_exhausted: bool,
}

/// Low-discrepancy start points: a randomly shifted Kronecker sequence.
pub fn low_discrepancy_starts(dim: usize, count: usize, seed: u64) -> Vec<PhaseVector> {
    // Generalized golden ratio: the positive root of x^(d+1) = x + 1.
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
    }
    let alpha: Vec<f64> = (1..=dim).map(|i| phi.powi(-(i as i32)).fract()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    (0..count)
        .map(|n| {
            let x: Vec<f64> = (0..dim).map(|i| shift[i] + n as f64 * alpha[i]).collect();
            PhaseVector::new(x).expect("finite phases")
        })
        .collect()
}

/// Runs [`local_search`] from every start (in parallel) and keeps the best
/// by objective, ties going to the lowest start index.
pub fn multi_start<O: Objective + ?Sized>(
    obj: &O,
    starts: &[PhaseVector],
    settings: &OptimizerSettings,
) -> Result<(usize, Vec<std::result::Result<LocalResult, String>>)> {
    if starts.is_empty() {
        return Err(Error::InvalidSettings("multi-start needs at least one start".into()));
    }
    let outcomes: Vec<std::result::Result<LocalResult, String>> = starts
        .par_iter()
        .map(|x0| local_search(obj, x0.as_slice(), settings).map_err(|e| e.to_string()))
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if let Ok(r) = o {
            if best.map_or(true, |(_, b)| r.objective > b) {
                best = Some((i, r.objective));
            }
        }
    }
    match best {
        Some((i, _)) => Ok((i, outcomes)),
        None => Err(Error::AllStartsFailed(starts.len())),
    }
}

/// Starts for an `M`-dimensional search: `x0` followed by `count − 1`
/// low-discrepancy points.
fn start_set(x0: &[f64], count: usize, seed: u64) -> Result<Vec<PhaseVector>> {
    let mut starts = vec![PhaseVector::new(x0.to_vec())?];
    if count > 1 {
        starts.extend(low_discrepancy_starts(x0.len(), count - 1, seed));
    }
    Ok(starts)
}

fn finish(
    obj: &BilevelObjective,
    x: Vec<f64>,
    starts: Vec<StartRecord>,
    evaluations: usize,
    start: Instant,
    heuristic: bool,
) -> Result<OptimizeResult> {
    let x_star = PhaseVector::new(x)?;
    let (objective, control, per_target_info, budget_exhausted) = if obj.env().num_observers() == 0 {
        let n = obj.env().num_targets();
        let l = obj.env().grid().steps;
        (0.0, ControlTensor::empty(0, n, l), vec![0.0; n], false)
    } else {
        let (_, sol) = obj.solve_at(x_star.as_slice())?;
        (sol.objective, sol.control, sol.per_target_info, sol.stats.budget_exhausted)
    };
    Ok(OptimizeResult {
        x_star,
        log_objective: objective.ln(),
        objective,
        control,
        per_target_info,
        wall_time: start.elapsed().as_secs_f64(),
        evaluations: evaluations + 1,
        starts,
        heuristic,
        budget_exhausted,
    })
}

fn run_starts(
    obj: &BilevelObjective,
    observers: Vec<usize>,
    x0: &[f64],
    count: usize,
    seed: u64,
    settings: &OptimizerSettings,
) -> Result<(Vec<f64>, Vec<StartRecord>, usize)> {
    let starts = start_set(x0, count.max(1), seed)?;
    let (best, outcomes) = multi_start(obj, &starts, settings)?;
    let evaluations = outcomes.iter().filter_map(|o| o.as_ref().ok()).map(|r| r.evaluations).sum();
    let x = outcomes[best].as_ref().expect("best start succeeded").x.clone();
    let records = starts
        .into_iter()
        .zip(outcomes)
        .map(|(s, outcome)| StartRecord { observers: observers.clone(), x0: s.into_vec(), outcome })
        .collect();
    Ok((x, records, evaluations))
}

/// Local optimization of all phases jointly from `x0`.
pub fn local_optimize(obj: &BilevelObjective, x0: &PhaseVector, settings: &OptimizerSettings) -> Result<OptimizeResult> {
    exhaustive(obj, x0, settings, 1, 0)
}

fn exhaustive(
    obj: &BilevelObjective,
    x0: &PhaseVector,
    settings: &OptimizerSettings,
    starts: usize,
    seed: u64,
) -> Result<OptimizeResult> {
    let start = Instant::now();
    let observers: Vec<usize> = (0..obj.env().num_observers()).collect();
    let (x, records, evaluations) = run_starts(obj, observers, x0.as_slice(), starts, seed, settings)?;
    finish(obj, x, records, evaluations, start, false)
}

/// Joint search over all `M` phases, from `x0` plus `starts − 1`
/// low-discrepancy starts.
pub fn exhaustive_search(
    env: &Environment,
    kind: ObjectiveKind,
    maxmin: &MaxMinSettings,
    x0: &PhaseVector,
    settings: &OptimizerSettings,
    starts: usize,
    seed: u64,
) -> Result<OptimizeResult> {
    let obj = BilevelObjective::new(env.clone(), kind, *maxmin);
    exhaustive(&obj, x0, settings, starts, seed)
}

/// Optimizes each observer's phase alone against the targets, then solves
/// the joint lower-level problem at the assembled phases.
///
/// Exact for the cumulative objective, whose tensor slices and optimal
/// controls separate by observer; a heuristic for max-min.
pub fn greedy_search(
    env: &Environment,
    kind: ObjectiveKind,
    maxmin: &MaxMinSettings,
    x0: &PhaseVector,
    settings: &OptimizerSettings,
    starts: usize,
    seed: u64,
) -> Result<OptimizeResult> {
    let start = Instant::now();
    if x0.len() != env.num_observers() {
        return Err(Error::Shape(format!("{} start phases for {} observers", x0.len(), env.num_observers())));
    }
    let mut x = Vec::with_capacity(x0.len());
    let mut records = Vec::new();
    let mut evaluations = 0;
    for i in 0..env.num_observers() {
        let sub = BilevelObjective::new(env.single_observer(i), kind, *maxmin);
        let (xi, rec, ev) = run_starts(&sub, vec![i], &[x0[i]], starts, seed.wrapping_add(i as u64), settings)?;
        x.push(xi[0]);
        records.extend(rec);
        evaluations += ev;
    }
    let obj = BilevelObjective::new(env.clone(), kind, *maxmin);
    finish(&obj, x, records, evaluations, start, kind == ObjectiveKind::MaxMin)
}

fn format_phases(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.10}")).collect();
    format!("[{}]", parts.join(", "))
}

impl OptimizeResult {
    /// Human-readable summary with the `x*`, `Solve Time (sec)`, `log(f)`
    /// table followed by per-start details.
    pub fn write_summary<W: Write>(&self, mut out: W, method: &str, kind: ObjectiveKind) -> Result<()> {
        writeln!(out, "method: {method}")?;
        writeln!(out, "objective: {}", kind.as_str())?;
        if self.heuristic {
            writeln!(out, "warning: greedy search is a heuristic for the maxmin objective")?;
        }
        if self.budget_exhausted {
            writeln!(out, "warning: lower-level node budget exhausted")?;
        }
        writeln!(out)?;
        writeln!(out, "| x* | Solve Time (sec) | log(f) |")?;
        writeln!(out, "|---|---|---|")?;
        writeln!(out, "| {} | {:.2} | {:.7} |", format_phases(self.x_star.as_slice()), self.wall_time, self.log_objective)?;
        writeln!(out)?;
        writeln!(out, "f: {:.16e}", self.objective)?;
        writeln!(out, "evaluations: {}", self.evaluations)?;
        let info: Vec<String> = self.per_target_info.iter().map(|v| format!("{v:.6e}")).collect();
        writeln!(out, "per-target information: [{}]", info.join(", "))?;
        writeln!(out)?;
        writeln!(out, "| start | observers | x0 | x | f | iterations | evaluations |")?;
        writeln!(out, "|---|---|---|---|---|---|---|")?;
        for (n, s) in self.starts.iter().enumerate() {
            let obs: Vec<String> = s.observers.iter().map(|o| o.to_string()).collect();
            match &s.outcome {
                Ok(r) => writeln!(
                    out,
                    "| {n} | {} | {} | {} | {:.10e} | {} | {} |",
                    obs.join(" "),
                    format_phases(&s.x0),
                    format_phases(&r.x),
                    r.objective,
                    r.iterations,
                    r.evaluations
                )?,
                Err(e) => writeln!(out, "| {n} | {} | {} | failed: {e} | | | |", obs.join(" "), format_phases(&s.x0))?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    struct Smooth<F: Fn(&[f64]) -> f64 + Sync> {
        dim: usize,
        f: F,
    }

    impl<F: Fn(&[f64]) -> f64 + Sync> Objective for Smooth<F> {
        fn dim(&self) -> usize {
            self.dim
        }
        fn value(&self, x: &[f64]) -> Result<f64> {
            Ok((self.f)(x))
        }
    }

    fn w_shape(x: f64) -> f64 {
        // Two interior maxima near 0.25 and 0.75 of unequal height.
        2.0 + (2.0 * TAU * x).sin() * 0.9 + 0.3 * (TAU * x).cos()
    }

    #[test]
    fn constant_landscape_has_zero_gradient() {
        let obj = Smooth { dim: 2, f: |_: &[f64]| 3.0 };
        assert_eq!(numerical_gradient(&obj, &[0.2, 0.9], 1e-6).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_matches_higher_order_stencil() {
        let obj = Smooth { dim: 2, f: |x: &[f64]| w_shape(x[0]) * (1.5 + (TAU * x[1]).cos()) };
        let h = 1e-6;
        for &(a, b) in &[(0.1, 0.2), (0.33, 0.71), (0.95, 0.05)] {
            let g = numerical_gradient(&obj, &[a, b], h).unwrap();
            let h4 = 1e-3;
            let f = |x: [f64; 2]| obj.value(&x).unwrap();
            let stencil = |i: usize| {
                let e = |s: f64| {
                    let mut p = [a, b];
                    p[i] += s;
                    f(p)
                };
                (-e(2.0 * h4) + 8.0 * e(h4) - 8.0 * e(-h4) + e(-2.0 * h4)) / (12.0 * h4)
            };
            for i in 0..2 {
                let s = stencil(i);
                assert!((g[i] - s).abs() <= 1e-3 * s.abs().max(1e-3), "{} vs {}", g[i], s);
            }
        }
    }

    #[test]
    fn gradient_wraps_at_the_seam() {
        let obj = Smooth { dim: 1, f: |x: &[f64]| (TAU * x[0]).sin() };
        let g = numerical_gradient(&obj, &[0.0], 1e-6).unwrap();
        assert!((g[0] - TAU).abs() < 1e-6);
    }

    #[test]
    fn ascent_is_monotone_and_reaches_the_local_peak() {
        let obj = Smooth { dim: 1, f: |x: &[f64]| w_shape(x[0]) };
        let r = local_search(&obj, &[0.2], &OptimizerSettings::default()).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1] >= w[0]));
        let sweep = (0..=1000).map(|i| i as f64 / 1000.0).filter(|x| (0.0..0.5).contains(x));
        let best = sweep.map(w_shape).fold(f64::MIN, f64::max);
        assert!(r.objective >= best - 1e-6 * best);
    }

    #[test]
    fn reaches_a_peak_across_the_seam() {
        let obj = Smooth { dim: 1, f: |x: &[f64]| 1.5 + (TAU * (x[0] - 0.01)).cos() };
        let r = local_search(&obj, &[0.9], &OptimizerSettings::default()).unwrap();
        assert!((r.x[0] - 0.01).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn non_finite_objective_is_reported() {
        let obj = Smooth { dim: 1, f: |x: &[f64]| if x[0] > 0.3 { f64::NAN } else { 1.0 + x[0] } };
        let err = local_search(&obj, &[0.29], &OptimizerSettings::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteObjective { .. }));
    }

    #[test]
    fn multi_start_picks_the_global_peak() {
        let obj = Smooth { dim: 1, f: |x: &[f64]| w_shape(x[0]) };
        let starts = low_discrepancy_starts(1, 16, 7);
        let (best, outcomes) = multi_start(&obj, &starts, &OptimizerSettings::default()).unwrap();
        let xbest = outcomes[best].as_ref().unwrap().x[0];
        let grid_best = (0..100_000)
            .map(|i| i as f64 / 100_000.0)
            .max_by(|a, b| w_shape(*a).total_cmp(&w_shape(*b)))
            .unwrap();
        assert!((xbest - grid_best).abs() < 1e-4, "{xbest} vs {grid_best}");
    }

    #[test]
    fn multi_start_best_is_monotone_in_nested_sets() {
        let obj = Smooth { dim: 2, f: |x: &[f64]| w_shape(x[0]) + w_shape(x[1] + 0.1) };
        let starts = low_discrepancy_starts(2, 8, 1);
        let mut prev = f64::MIN;
        for k in 1..=starts.len() {
            let (best, out) = multi_start(&obj, &starts[..k], &OptimizerSettings::default()).unwrap();
            let v = out[best].as_ref().unwrap().objective;
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn single_start_equals_local_search() {
        let obj = Smooth { dim: 1, f: |x: &[f64]| w_shape(x[0]) };
        let x0 = PhaseVector::new(vec![0.6]).unwrap();
        let (_, out) = multi_start(&obj, std::slice::from_ref(&x0), &OptimizerSettings::default()).unwrap();
        let direct = local_search(&obj, x0.as_slice(), &OptimizerSettings::default()).unwrap();
        assert_eq!(out[0].as_ref().unwrap(), &direct);
    }

    #[test]
    fn low_discrepancy_starts_are_seeded() {
        let a = low_discrepancy_starts(3, 5, 42);
        assert_eq!(a, low_discrepancy_starts(3, 5, 42));
        assert_ne!(a, low_discrepancy_starts(3, 5, 43));
        assert!(a.iter().all(|p| p.as_slice().iter().all(|v| (0.0..1.0).contains(v))));
    }

    #[test]
    fn all_failed_starts_is_an_error() {
        let obj = Smooth { dim: 1, f: |_: &[f64]| f64::NAN };
        let starts = low_discrepancy_starts(1, 3, 0);
        assert!(matches!(
            multi_start(&obj, &starts, &OptimizerSettings::default()),
            Err(Error::AllStartsFailed(3))
        ));
    }
}
