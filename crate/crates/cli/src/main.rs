use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Phasing and tasking studies for cislunar observer constellations.
#[derive(Debug, Parser)]
#[command(name = "cislunar-ssa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario TOML file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Orbit catalog CSV. Defaults to the scenario's `catalog` entry, then
    /// to $CISLUNAR_CATALOG_PATH.
    #[arg(long)]
    catalog: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Objective {
    Max,
    Maxmin,
}

impl From<Objective> for cislunar_ssa::ObjectiveKind {
    fn from(o: Objective) -> Self {
        match o {
            Objective::Max => Self::Max,
            Objective::Maxmin => Self::MaxMin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Policy {
    Optimal,
    Myopic,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Greedy,
    Exhaustive,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample one catalog orbit over the scenario grid.
    Propagate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        orbit: String,
        #[arg(long, default_value_t = 0.0)]
        phase: f64,
    },
    /// Sweep one observer's phase with the others held at their scenario phases.
    Scan {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        observer: usize,
        /// Number of phases, evenly spaced over [0, 1).
        #[arg(long, default_value_t = 40)]
        phases: usize,
        #[arg(long, value_enum, default_value_t = Policy::Both)]
        policy: Policy,
        #[arg(long, value_enum)]
        objective: Option<Objective>,
    },
    /// Optimize observer phases and tasking jointly.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Method::Greedy)]
        method: Method,
        #[arg(long, value_enum)]
        objective: Option<Objective>,
        /// Multi-start count (per observer for greedy).
        #[arg(long)]
        starts: Option<usize>,
    },
    /// Per-target share of the observation budget over a phase sweep.
    Budget {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        observer: usize,
        #[arg(long, default_value_t = 40)]
        phases: usize,
        #[arg(long, value_enum)]
        objective: Option<Objective>,
    },
    /// Run the covariance recursion over a schedule and check it against the
    /// information tensor.
    ValidateEkf {
        #[command(flatten)]
        common: Common,
        /// Schedule CSV (`step,observer,target`).
        #[arg(long)]
        schedule: PathBuf,
        /// Observer phases, comma separated. Defaults to the scenario phases.
        #[arg(long, value_delimiter = ',')]
        phases: Option<Vec<f64>>,
    },
}

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    /// Rows were skipped or a solver ran out of budget.
    Partial,
}

fn catalog_path(common: &Common, scenario: &cislunar_ssa::Scenario) -> anyhow::Result<PathBuf> {
    if let Some(p) = &common.catalog {
        return Ok(p.clone());
    }
    let dir = common.scenario.parent().unwrap_or(Path::new("."));
    if let Some(p) = scenario.catalog_path(dir) {
        return Ok(p);
    }
    if let Some(p) = std::env::var_os("CISLUNAR_CATALOG_PATH") {
        return Ok(PathBuf::from(p));
    }
    bail!("no catalog: pass --catalog, set `catalog` in the scenario or CISLUNAR_CATALOG_PATH")
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let argv: Vec<String> = std::env::args().collect();
    let common = match &cli.command {
        Command::Propagate { common, .. }
        | Command::Scan { common, .. }
        | Command::Optimize { common, .. }
        | Command::Budget { common, .. }
        | Command::ValidateEkf { common, .. } => common,
    };
    let mut scenario = cislunar_ssa::Scenario::load(&common.scenario)
        .with_context(|| format!("reading scenario {}", common.scenario.display()))?;
    if let Some(seed) = common.seed {
        scenario.seed = seed;
    }
    let path = catalog_path(common, &scenario)?;
    let file = std::fs::File::open(&path).with_context(|| format!("opening catalog {}", path.display()))?;
    let catalog = cislunar_ssa::catalog::load_catalog(file, &Default::default())
        .with_context(|| format!("loading catalog {}", path.display()))?;
    std::fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    let ctx = commands::Context { scenario, catalog, out: common.out.clone(), argv: argv.join(" ") };

    match cli.command {
        Command::Propagate { orbit, phase, .. } => commands::propagate(&ctx, &orbit, phase),
        Command::Scan { observer, phases, policy, objective, .. } => {
            commands::scan(&ctx, observer, phases, policy, objective.map(Into::into))
        }
        Command::Optimize { method, objective, starts, .. } => {
            commands::optimize(&ctx, method, objective.map(Into::into), starts)
        }
        Command::Budget { observer, phases, objective, .. } => {
            commands::budget(&ctx, observer, phases, objective.map(Into::into))
        }
        Command::ValidateEkf { schedule, phases, .. } => commands::validate_ekf(&ctx, &schedule, phases),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
