use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context as _};
use cislunar_ssa::catalog::sample_trajectory;
use cislunar_ssa::csvfmt::{float, line};
use cislunar_ssa::ekf::{run_schedule, TargetBelief};
use cislunar_ssa::phasing::{exhaustive_search, greedy_search};
use cislunar_ssa::scenario::ResolvedScenario;
use cislunar_ssa::tasking::{evaluate_control, observation_budget, relative_optimality_gap, solve};
use cislunar_ssa::{ControlTensor, ObjectiveKind, OrbitSpec, PhaseVector, Scenario};
use nalgebra::Matrix6;
use rayon::prelude::*;

use crate::{Method, Outcome, Policy};

/// Tolerance on the filter/batch information identity.
const IDENTITY_TOL: f64 = 1e-6;

pub struct Context {
    pub scenario: Scenario,
    pub catalog: Vec<OrbitSpec>,
    pub out: PathBuf,
    pub argv: String,
}

impl Context {
    fn resolve(&self) -> anyhow::Result<ResolvedScenario> {
        Ok(self.scenario.resolve(&self.catalog)?)
    }

    fn write(&self, name: &str, contents: &[u8]) -> anyhow::Result<()> {
        let path = self.out.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    /// Writes `run.txt`: the command, scenario hash and produced files.
    fn manifest(&self, outputs: &[&str], notes: &str) -> anyhow::Result<()> {
        let mut text = String::new();
        writeln!(text, "command: {}", self.argv)?;
        writeln!(text, "scenario_hash: {}", self.scenario.hash()?)?;
        writeln!(text, "seed: {}", self.scenario.seed)?;
        writeln!(text, "outputs: {}", outputs.join(", "))?;
        text.push_str(notes);
        self.write("run.txt", text.as_bytes())
    }
}

fn sweep_phases(count: usize) -> anyhow::Result<Vec<f64>> {
    ensure!(count >= 1, "--phases must be at least 1");
    Ok((0..count).map(|q| q as f64 / count as f64).collect())
}

fn with_phase(x0: &PhaseVector, observer: usize, phase: f64) -> anyhow::Result<PhaseVector> {
    let mut x = x0.as_slice().to_vec();
    ensure!(observer < x.len(), "observer {observer} out of range ({} observers)", x.len());
    x[observer] = phase;
    Ok(PhaseVector::new(x)?)
}

pub fn propagate(ctx: &Context, orbit: &str, phase: f64) -> anyhow::Result<Outcome> {
    let spec = ctx
        .catalog
        .iter()
        .find(|o| o.id == orbit)
        .ok_or_else(|| cislunar_ssa::Error::UnknownOrbit(orbit.to_owned()))?;
    let grid = ctx.scenario.time_grid(&ctx.catalog)?;
    let epochs = grid.all_epochs();
    let states = sample_trajectory(spec, phase, &epochs, &ctx.scenario.propagation_settings()?)?;
    let mut csv = String::from("t,x,y,z,vx,vy,vz\n");
    for (t, s) in epochs.iter().zip(&states) {
        csv.push_str(&line(std::iter::once(float(*t)).chain(s.iter().map(|v| float(*v)))));
    }
    ctx.write("trajectory.csv", csv.as_bytes())?;
    ctx.manifest(&["trajectory.csv"], "")?;
    Ok(Outcome::Complete)
}

struct ScanRow {
    f_opt: Option<f64>,
    f_myop: Option<f64>,
    status: &'static str,
}

pub fn scan(
    ctx: &Context,
    observer: usize,
    count: usize,
    policy: Policy,
    objective: Option<ObjectiveKind>,
) -> anyhow::Result<Outcome> {
    let r = ctx.resolve()?;
    let kind = objective.unwrap_or(r.objective);
    let phases = sweep_phases(count)?;
    with_phase(&r.x0, observer, 0.0)?;
    let rows: Vec<ScanRow> = phases
        .par_iter()
        .map(|&p| {
            let row = || -> cislunar_ssa::Result<ScanRow> {
                let x = PhaseVector::new(with_phase_unchecked(&r.x0, observer, p))?;
                let a = r.env.build_info_tensor(&x)?;
                let mut row = ScanRow { f_opt: None, f_myop: None, status: "ok" };
                if policy != Policy::Myopic {
                    let s = solve(&a, kind, &r.maxmin)?;
                    if s.stats.budget_exhausted {
                        row.status = "budget";
                    }
                    row.f_opt = Some(s.objective);
                }
                if policy != Policy::Optimal {
                    let u = r.env.myopic_control(&x)?;
                    row.f_myop = Some(evaluate_control(&a, &u, kind)?);
                }
                Ok(row)
            };
            row().unwrap_or_else(|e| {
                eprintln!("phase {p}: skipped: {e}");
                ScanRow { f_opt: None, f_myop: None, status: "skipped" }
            })
        })
        .collect();

    let mut header = vec!["phase"];
    if policy != Policy::Myopic {
        header.push("f_opt");
    }
    if policy != Policy::Optimal {
        header.push("f_myop");
    }
    header.push("status");
    let mut csv = line(&header);
    let opt_field = |v: Option<f64>| v.map(float).unwrap_or_default();
    for (p, row) in phases.iter().zip(&rows) {
        let mut fields = vec![float(*p)];
        if policy != Policy::Myopic {
            fields.push(opt_field(row.f_opt));
        }
        if policy != Policy::Optimal {
            fields.push(opt_field(row.f_myop));
        }
        fields.push(row.status.to_owned());
        csv.push_str(&line(fields));
    }
    ctx.write("scan.csv", csv.as_bytes())?;

    let mut notes = String::new();
    writeln!(notes, "objective: {}", kind.as_str())?;
    if policy == Policy::Both {
        let (opt, myop): (Vec<f64>, Vec<f64>) =
            rows.iter().filter(|r| r.status == "ok").map(|r| (r.f_opt.unwrap(), r.f_myop.unwrap())).unzip();
        if opt.is_empty() {
            writeln!(notes, "rog: unavailable (no complete rows)")?;
        } else {
            match relative_optimality_gap(&opt, &myop) {
                Ok(rog) => {
                    println!("ROG: {rog:.6}");
                    writeln!(notes, "rog: {}", float(rog))?;
                }
                Err(e) => writeln!(notes, "rog: unavailable ({e})")?,
            }
        }
    }
    let partial = rows.iter().filter(|r| r.status != "ok").count();
    writeln!(notes, "incomplete_rows: {partial}")?;
    ctx.manifest(&["scan.csv"], &notes)?;
    Ok(if partial == 0 { Outcome::Complete } else { Outcome::Partial })
}

fn with_phase_unchecked(x0: &PhaseVector, observer: usize, phase: f64) -> Vec<f64> {
    let mut x = x0.as_slice().to_vec();
    x[observer] = phase;
    x
}

fn schedule_csv(u: &ControlTensor) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    u.write_schedule_csv(&mut buf)?;
    Ok(buf)
}

pub fn optimize(
    ctx: &Context,
    method: Method,
    objective: Option<ObjectiveKind>,
    starts: Option<usize>,
) -> anyhow::Result<Outcome> {
    let r = ctx.resolve()?;
    let kind = objective.unwrap_or(r.objective);
    let starts = starts.unwrap_or(r.starts).max(1);
    let search = match method {
        Method::Greedy => greedy_search,
        Method::Exhaustive => exhaustive_search,
    };
    let result = search(&r.env, kind, &r.maxmin, &r.x0, &r.optimizer, starts, r.seed)?;
    let name = match method {
        Method::Greedy => "greedy",
        Method::Exhaustive => "exhaustive",
    };
    if result.heuristic {
        eprintln!("warning: greedy search is a heuristic for the maxmin objective");
    }

    let mut summary = Vec::new();
    writeln!(summary, "scenario_hash: {}", r.hash)?;
    writeln!(summary, "seed: {}", r.seed)?;
    writeln!(summary, "starts: {starts}")?;
    result.write_summary(&mut summary, name, kind)?;
    ctx.write("summary.txt", &summary)?;
    ctx.write("schedule.csv", &schedule_csv(&result.control)?)?;

    let mut phases = String::from("observer,phase\n");
    for (i, p) in result.x_star.as_slice().iter().enumerate() {
        phases.push_str(&line([i.to_string(), float(*p)]));
    }
    ctx.write("phases.csv", phases.as_bytes())?;

    let shares = observation_budget(&result.control);
    let mut targets = String::from("target,information,share\n");
    for (j, (info, share)) in result.per_target_info.iter().zip(&shares).enumerate() {
        targets.push_str(&line([j.to_string(), float(*info), float(*share)]));
    }
    ctx.write("targets.csv", targets.as_bytes())?;

    let tensor = r.env.build_info_tensor(&result.x_star)?;
    let mut buf = Vec::new();
    tensor.write_csv(&mut buf)?;
    ctx.write("info_tensor.csv", &buf)?;

    println!("x* = {:?}", result.x_star.as_slice());
    println!("log(f) = {:.7}", result.log_objective);
    let mut notes = String::new();
    writeln!(notes, "method: {name}")?;
    writeln!(notes, "objective: {}", kind.as_str())?;
    writeln!(notes, "budget_exhausted: {}", result.budget_exhausted)?;
    ctx.manifest(&["summary.txt", "schedule.csv", "phases.csv", "targets.csv", "info_tensor.csv"], &notes)?;
    Ok(if result.budget_exhausted { Outcome::Partial } else { Outcome::Complete })
}

pub fn budget(
    ctx: &Context,
    observer: usize,
    count: usize,
    objective: Option<ObjectiveKind>,
) -> anyhow::Result<Outcome> {
    let r = ctx.resolve()?;
    let kind = objective.unwrap_or(r.objective);
    let phases = sweep_phases(count)?;
    with_phase(&r.x0, observer, 0.0)?;
    let n = r.env.num_targets();
    let rows: Vec<(Vec<f64>, &'static str)> = phases
        .par_iter()
        .map(|&p| {
            let row = || -> cislunar_ssa::Result<(Vec<f64>, &'static str)> {
                let x = PhaseVector::new(with_phase_unchecked(&r.x0, observer, p))?;
                let a = r.env.build_info_tensor(&x)?;
                let s = solve(&a, kind, &r.maxmin)?;
                let status = if s.stats.budget_exhausted { "budget" } else { "ok" };
                Ok((observation_budget(&s.control), status))
            };
            row().unwrap_or_else(|e| {
                eprintln!("phase {p}: skipped: {e}");
                (Vec::new(), "skipped")
            })
        })
        .collect();
    let mut csv = String::from("phase,target,share,status\n");
    for (p, (shares, status)) in phases.iter().zip(&rows) {
        for j in 0..n {
            let share = shares.get(j).map(|s| float(*s)).unwrap_or_default();
            csv.push_str(&line([float(*p), j.to_string(), share, (*status).to_owned()]));
        }
    }
    ctx.write("budget.csv", csv.as_bytes())?;
    let partial = rows.iter().filter(|r| r.1 != "ok").count();
    let notes = format!("objective: {}\nincomplete_rows: {partial}\n", kind.as_str());
    ctx.manifest(&["budget.csv"], &notes)?;
    Ok(if partial == 0 { Outcome::Complete } else { Outcome::Partial })
}

pub fn validate_ekf(ctx: &Context, schedule: &Path, phases: Option<Vec<f64>>) -> anyhow::Result<Outcome> {
    let r = ctx.resolve()?;
    let env = &r.env;
    let x = match phases {
        Some(p) => PhaseVector::new(p)?,
        None => r.x0.clone(),
    };
    ensure!(x.len() == env.num_observers(), "{} phases for {} observers", x.len(), env.num_observers());
    let file = std::fs::File::open(schedule).with_context(|| format!("opening schedule {}", schedule.display()))?;
    let u = ControlTensor::read_schedule_csv(file, env.num_observers(), env.num_targets(), env.grid().steps)
        .with_context(|| format!("reading schedule {}", schedule.display()))?;

    let ekf = &ctx.scenario.ekf;
    let initial = (0..env.num_targets())
        .map(|j| TargetBelief::diagonal(env.track(j).states[0], ekf.sigma_position, ekf.sigma_velocity))
        .collect::<cislunar_ssa::Result<Vec<_>>>()?;
    let q = Matrix6::identity() * ekf.process_noise;
    let history = run_schedule(env, &x, &u, &initial, &q)?;
    let mut buf = Vec::new();
    history.write_csv(&mut buf)?;
    ctx.write("beliefs.csv", &buf)?;

    let mut report = String::new();
    writeln!(report, "scenario_hash: {}", r.hash)?;
    writeln!(report, "assigned_slots: {}", u.assigned_count())?;
    let mut failed = None;
    if u.assigned_count() == 0 {
        writeln!(report, "identity: skipped (empty schedule)")?;
    } else if ekf.process_noise != 0.0 {
        writeln!(report, "identity: skipped (process noise is nonzero)")?;
    } else {
        let a = env.build_info_tensor(&x)?;
        let batch = evaluate_control(&a, &u, ObjectiveKind::Max)?;
        let recursive = history.accumulated_trace()?;
        let residual = (recursive - batch).abs() / batch.abs().max(f64::MIN_POSITIVE);
        writeln!(report, "batch_information: {}", float(batch))?;
        writeln!(report, "recursive_information: {}", float(recursive))?;
        writeln!(report, "relative_residual: {}", float(residual))?;
        let verdict = if residual <= IDENTITY_TOL { "pass" } else { "fail" };
        writeln!(report, "identity: {verdict} (tolerance {IDENTITY_TOL:e})")?;
        println!("identity residual: {residual:.3e} ({verdict})");
        if residual > IDENTITY_TOL {
            failed = Some(residual);
        }
    }
    ctx.write("ekf_report.txt", report.as_bytes())?;
    ctx.manifest(&["beliefs.csv", "ekf_report.txt"], "")?;
    if let Some(residual) = failed {
        bail!("information identity residual {residual:e} exceeds {IDENTITY_TOL:e}");
    }
    Ok(Outcome::Complete)
}
