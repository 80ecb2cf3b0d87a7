//! Observers and targets on a common time grid.
//!
//! Target trajectories and their information mappings do not depend on the
//! observer phases, so they are computed once when the environment is built.
//! Evaluating a phase vector only propagates the observers.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::catalog::{sample_trajectory, OrbitSpec, PhaseVector, TimeGrid};
use crate::dynamics::{PropagationSettings, StateVector, Stm};
use crate::error::{Error, Result};
use crate::observation::{InfoTensor, MeasurementModel};
use crate::tasking::{myopic_policy, ControlTensor};

/// A target orbit with its fixed phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub orbit: OrbitSpec,
    pub phase: f64,
}

/// Phase-independent data for one target.
#[derive(Debug, Clone)]
pub struct TargetTrack {
    /// States at the `L + 1` grid epochs.
    pub states: Vec<StateVector>,
    /// `Ψ_k`, mapping perturbations at `t_L` to `t_k`, for `k < L`.
    pub psi: Vec<Stm>,
    /// Position-row Gram matrices `Ψ_r Ψ_rᵀ` for `k < L`.
    gram: Vec<Matrix3<f64>>,
}

impl TargetTrack {
    pub fn compute(target: &Target, grid: &TimeGrid, settings: &PropagationSettings) -> Result<Self> {
        let epochs = grid.all_epochs();
        let states = sample_trajectory(&target.orbit, target.phase, &epochs, settings)?;
        let dynamics = target.orbit.dynamics();
        let l = grid.steps;
        let mut psi = vec![Stm::identity(); l];
        let mut acc = Stm::identity();
        // Backward segment maps chained from the terminal epoch.
        for k in (0..l).rev() {
            let (_, seg) = dynamics.propagate_with_stm(&states[k + 1], epochs[k + 1], epochs[k], settings)?;
            acc = seg * acc;
            psi[k] = acc;
        }
        let gram = psi
            .iter()
            .map(|p| {
                let top = p.fixed_rows::<3>(0);
                top * top.transpose()
            })
            .collect();
        Ok(Self { states, psi, gram })
    }

    pub fn position(&self, k: usize) -> Vector3<f64> {
        self.states[k].fixed_rows::<3>(0).into_owned()
    }
}

/// A scenario with observers to be phased and targets with fixed phases.
#[derive(Debug, Clone)]
pub struct Environment {
    grid: TimeGrid,
    settings: PropagationSettings,
    measurement: MeasurementModel,
    observers: Vec<OrbitSpec>,
    targets: Arc<Vec<Target>>,
    tracks: Arc<Vec<TargetTrack>>,
}

impl Environment {
    pub fn new(
        grid: TimeGrid,
        settings: PropagationSettings,
        measurement: MeasurementModel,
        observers: Vec<OrbitSpec>,
        targets: Vec<Target>,
    ) -> Result<Self> {
        settings.validate()?;
        measurement.validate()?;
        let mut mus = observers.iter().chain(targets.iter().map(|t| &t.orbit)).map(|o| o.mu.value());
        if let Some(first) = mus.next() {
            if mus.any(|m| m != first) {
                return Err(Error::Scenario("all orbits must share the same mass ratio".into()));
            }
        }
        let tracks: Vec<Result<TargetTrack>> =
            targets.par_iter().map(|t| TargetTrack::compute(t, &grid, &settings)).collect();
        let tracks = tracks
            .into_iter()
            .enumerate()
            .map(|(j, r)| r.map_err(|e| e.for_target(j)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid,
            settings,
            measurement,
            observers,
            targets: Arc::new(targets),
            tracks: Arc::new(tracks),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn settings(&self) -> &PropagationSettings {
        &self.settings
    }

    pub fn measurement(&self) -> &MeasurementModel {
        &self.measurement
    }

    pub fn observers(&self) -> &[OrbitSpec] {
        &self.observers
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn num_observers(&self) -> usize {
        self.observers.len()
    }

    pub fn num_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn track(&self, j: usize) -> &TargetTrack {
        &self.tracks[j]
    }

    /// Same targets and grid, different observers. Target data is shared.
    pub fn with_observers(&self, observers: Vec<OrbitSpec>) -> Self {
        Self { observers, ..self.clone() }
    }

    /// The sub-environment containing only observer `i`.
    pub fn single_observer(&self, i: usize) -> Self {
        self.with_observers(vec![self.observers[i].clone()])
    }

    /// Same geometry with a different measurement model. The cached target
    /// data does not depend on it.
    pub fn with_measurement(&self, measurement: MeasurementModel) -> Result<Self> {
        measurement.validate()?;
        Ok(Self { measurement, ..self.clone() })
    }

    /// Observer `i` positions at the `L` observation epochs.
    pub fn observer_positions(&self, i: usize, phase: f64) -> Result<Vec<Vector3<f64>>> {
        let epochs = self.grid.observation_epochs();
        let states = sample_trajectory(&self.observers[i], phase, &epochs, &self.settings)
            .map_err(|e| e.for_observer(i))?;
        Ok(states.iter().map(|s| s.fixed_rows::<3>(0).into_owned()).collect())
    }

    /// Target `j` positions at the `L` observation epochs.
    pub fn target_positions(&self, j: usize) -> Vec<Vector3<f64>> {
        (0..self.grid.steps).map(|k| self.tracks[j].position(k)).collect()
    }

    /// The `N × L` block `A[i, :, :]` for observer `i` at `phase`.
    pub fn info_block(&self, i: usize, phase: f64) -> Result<Vec<f64>> {
        let positions = self.observer_positions(i, phase)?;
        self.info_block_from_positions(&positions).map_err(|e| e.for_observer(i))
    }

    fn info_block_from_positions(&self, positions: &[Vector3<f64>]) -> Result<Vec<f64>> {
        let l = self.grid.steps;
        let mut block = Vec::with_capacity(self.tracks.len() * l);
        for track in self.tracks.iter() {
            for (k, obs) in positions.iter().enumerate() {
                block.push(self.measurement.info_trace(obs, &track.position(k), &track.gram[k])?);
            }
        }
        Ok(block)
    }

    /// Assembles `A[i, j, k]` at the given observer phases. Observers are
    /// processed in parallel; the result does not depend on scheduling.
    pub fn build_info_tensor(&self, phases: &PhaseVector) -> Result<InfoTensor> {
        self.check_phases(phases)?;
        let blocks: Vec<Result<Vec<f64>>> = (0..self.observers.len())
            .into_par_iter()
            .map(|i| self.info_block(i, phases[i]))
            .collect();
        let blocks = blocks.into_iter().collect::<Result<Vec<_>>>()?;
        let mut tensor = InfoTensor::from_blocks(self.tracks.len(), self.grid.steps, blocks)?;
        tensor.grid = Some(self.grid);
        Ok(tensor)
    }

    /// Nearest-target tasking at the given observer phases.
    pub fn myopic_control(&self, phases: &PhaseVector) -> Result<ControlTensor> {
        self.check_phases(phases)?;
        let observers = (0..self.observers.len())
            .map(|i| self.observer_positions(i, phases[i]))
            .collect::<Result<Vec<_>>>()?;
        let targets: Vec<_> = (0..self.tracks.len()).map(|j| self.target_positions(j)).collect();
        Ok(myopic_policy(&observers, &targets))
    }

    fn check_phases(&self, phases: &PhaseVector) -> Result<()> {
        if phases.len() != self.observers.len() {
            return Err(Error::Shape(format!(
                "{} phases for {} observers",
                phases.len(),
                self.observers.len()
            )));
        }
        Ok(())
    }
}

/// Free-function form of [`Environment::build_info_tensor`].
pub fn build_info_tensor(env: &Environment, phases: &PhaseVector) -> Result<InfoTensor> {
    env.build_info_tensor(phases)
}
