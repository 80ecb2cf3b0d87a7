//! Scenario files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! mu = 0.012150585609624
//! catalog = "earth_moon.csv"   # optional, relative to the scenario file
//! objective = "max"            # or "maxmin"
//! seed = 7
//!
//! [grid]
//! t_start = 0.0
//! t_end = 3.4                  # optional: defaults to one period of the longest target orbit
//! steps = 215
//!
//! [measurement]
//! sigma = 1e-5
//! rho_floor = 1e-6
//! close_approach = "error"     # or "clamp"
//!
//! [[observers]]
//! orbit = "dro_small"
//! phase = 0.25                 # optional start phase, default 0.5
//!
//! [[targets]]
//! orbit = "l1_lyap_small"
//! phase = 0.0
//! ```
//!
//! Optional `[propagation]`, `[solver]` and `[ekf]` tables override the
//! integrator, optimizer and filter defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::{OrbitSpec, PhaseVector, TimeGrid};
use crate::dynamics::PropagationSettings;
use crate::environment::{Environment, Target};
use crate::error::{Error, Result};
use crate::observation::{CloseApproachPolicy, MeasurementModel};
use crate::phasing::OptimizerSettings;
use crate::tasking::{MaxMinSettings, ObjectiveKind};

/// Default number of grid steps.
pub const DEFAULT_STEPS: usize = 215;

/// Default start phase for observers without one.
pub const DEFAULT_START_PHASE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<String>,
    #[serde(default)]
    pub objective: ObjectiveKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub measurement: MeasurementConfig,
    #[serde(default)]
    pub propagation: PropagationConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub ekf: EkfConfig,
    #[serde(default)]
    pub observers: Vec<ObserverConfig>,
    #[serde(default)]
    pub targets: Vec<TargetConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub t_start: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_steps() -> usize {
    DEFAULT_STEPS
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { t_start: 0.0, t_end: None, steps: DEFAULT_STEPS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasurementConfig {
    pub sigma: f64,
    pub rho_floor: f64,
    pub close_approach: CloseApproachPolicy,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        let m = MeasurementModel::default();
        Self { sigma: m.sigma, rho_floor: m.rho_floor, close_approach: m.close_approach }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        let p = PropagationSettings::default();
        Self { rel_tol: p.rel_tol, abs_tol: p.abs_tol, max_step: p.max_step, max_steps: p.max_steps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub gap_tol: f64,
    pub node_budget: usize,
    pub starts: usize,
    pub gradient_step: f64,
    pub grad_tol: f64,
    pub step_tol: f64,
    pub max_iterations: usize,
    pub max_phase_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let mm = MaxMinSettings::default();
        let opt = OptimizerSettings::default();
        Self {
            gap_tol: mm.gap_tol,
            node_budget: mm.node_budget,
            starts: 1,
            gradient_step: opt.gradient_step,
            grad_tol: opt.grad_tol,
            step_tol: opt.step_tol,
            max_iterations: opt.max_iterations,
            max_phase_step: opt.max_step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EkfConfig {
    /// Initial position standard deviation of every target.
    pub sigma_position: f64,
    /// Initial velocity standard deviation of every target.
    pub sigma_velocity: f64,
    /// Diagonal process noise added per step.
    pub process_noise: f64,
}

impl Default for EkfConfig {
    fn default() -> Self {
        Self { sigma_position: 1e-3, sigma_velocity: 1e-3, process_noise: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverConfig {
    pub orbit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub orbit: String,
    #[serde(default)]
    pub phase: f64,
}

/// A scenario bound to catalog orbits.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub env: Environment,
    /// Observer start phases.
    pub x0: PhaseVector,
    pub objective: ObjectiveKind,
    pub maxmin: MaxMinSettings,
    pub optimizer: OptimizerSettings,
    pub starts: usize,
    pub seed: u64,
    pub hash: String,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the canonical serialization, as lowercase hex.
    pub fn hash(&self) -> Result<String> {
        let canonical = self.to_toml_string()?;
        Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
    }

    /// The `catalog` entry resolved against the scenario file's directory.
    pub fn catalog_path(&self, scenario_dir: &Path) -> Option<PathBuf> {
        self.catalog.as_ref().map(|c| scenario_dir.join(c))
    }

    pub fn measurement_model(&self) -> Result<MeasurementModel> {
        let m = &self.measurement;
        MeasurementModel::new(m.sigma, m.rho_floor, m.close_approach)
    }

    pub fn propagation_settings(&self) -> Result<PropagationSettings> {
        let p = &self.propagation;
        let s = PropagationSettings { rel_tol: p.rel_tol, abs_tol: p.abs_tol, max_step: p.max_step, max_steps: p.max_steps };
        s.validate()?;
        Ok(s)
    }

    pub fn maxmin_settings(&self) -> MaxMinSettings {
        MaxMinSettings { gap_tol: self.solver.gap_tol, node_budget: self.solver.node_budget }
    }

    pub fn optimizer_settings(&self) -> OptimizerSettings {
        let s = &self.solver;
        OptimizerSettings {
            gradient_step: s.gradient_step,
            grad_tol: s.grad_tol,
            step_tol: s.step_tol,
            max_iterations: s.max_iterations,
            max_step: s.max_phase_step,
        }
    }

    fn lookup<'a>(catalog: &'a [OrbitSpec], id: &str) -> Result<&'a OrbitSpec> {
        catalog.iter().find(|o| o.id == id).ok_or_else(|| Error::UnknownOrbit(id.to_owned()))
    }

    /// The time grid, with the default horizon applied.
    pub fn time_grid(&self, catalog: &[OrbitSpec]) -> Result<TimeGrid> {
        let t_end = match self.grid.t_end {
            Some(t) => t,
            None => {
                let longest = self
                    .targets
                    .iter()
                    .map(|t| Self::lookup(catalog, &t.orbit).map(|o| o.period))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .fold(f64::NAN, f64::max);
                if longest.is_nan() {
                    return Err(Error::Scenario("grid.t_end is required when there are no targets".into()));
                }
                self.grid.t_start + longest
            }
        };
        TimeGrid::new(self.grid.t_start, t_end, self.grid.steps)
    }

    /// Binds orbit ids to `catalog` and builds the environment.
    pub fn resolve(&self, catalog: &[OrbitSpec]) -> Result<ResolvedScenario> {
        let check_mu = |o: &OrbitSpec| -> Result<()> {
            let m = o.mu.value();
            if (m - self.mu).abs() > 1e-12 * self.mu.abs().max(1.0) {
                return Err(Error::Scenario(format!(
                    "orbit '{}' has mu {m} but the scenario uses {}",
                    o.id, self.mu
                )));
            }
            Ok(())
        };
        let mut observers = Vec::new();
        let mut x0 = Vec::new();
        for o in &self.observers {
            let orbit = Self::lookup(catalog, &o.orbit)?;
            check_mu(orbit)?;
            observers.push(orbit.clone());
            x0.push(o.phase.unwrap_or(DEFAULT_START_PHASE));
        }
        let mut targets = Vec::new();
        for t in &self.targets {
            let orbit = Self::lookup(catalog, &t.orbit)?;
            check_mu(orbit)?;
            targets.push(Target { orbit: orbit.clone(), phase: t.phase });
        }
        let grid = self.time_grid(catalog)?;
        let env = Environment::new(
            grid,
            self.propagation_settings()?,
            self.measurement_model()?,
            observers,
            targets,
        )?;
        Ok(ResolvedScenario {
            env,
            x0: PhaseVector::new(x0)?,
            objective: self.objective,
            maxmin: self.maxmin_settings(),
            optimizer: self.optimizer_settings(),
            starts: self.solver.starts.max(1),
            seed: self.seed,
            hash: self.hash()?,
        })
    }
}
