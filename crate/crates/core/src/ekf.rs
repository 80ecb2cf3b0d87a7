//! Linearized covariance recursion along the reference target trajectories.
//!
//! Beliefs carry both the covariance and the information matrix. Measurement
//! updates are done in information form, and without process noise the time
//! update maps the information by congruence with `Φ⁻¹`, so the final
//! accumulated information matches the batch sum behind the tasking objective
//! to roundoff.

use std::io::Write;

use nalgebra::{Matrix3, Matrix3x6, Matrix6, Vector3};
use rayon::prelude::*;

use crate::catalog::PhaseVector;
use crate::csvfmt;
use crate::dynamics::{StateVector, Stm};
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::tasking::ControlTensor;

/// Largest covariance condition number accepted by [`update`].
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct TargetBelief {
    pub state: StateVector,
    covariance: Matrix6<f64>,
    information: Matrix6<f64>,
}

fn symmetrize(m: &Matrix6<f64>) -> Matrix6<f64> {
    (m + m.transpose()) * 0.5
}

fn spd_inverse(m: &Matrix6<f64>) -> Result<Matrix6<f64>> {
    let chol = m.cholesky().ok_or_else(|| Error::IllConditioned(f64::INFINITY))?;
    Ok(symmetrize(&chol.inverse()))
}

fn condition(m: &Matrix6<f64>) -> f64 {
    let eig = m.symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

impl TargetBelief {
    pub fn new(state: StateVector, covariance: Matrix6<f64>) -> Result<Self> {
        let scale = covariance.amax().max(f64::MIN_POSITIVE);
        if (covariance - covariance.transpose()).amax() > 1e-10 * scale {
            return Err(Error::InvalidSettings("covariance is not symmetric".into()));
        }
        let covariance = symmetrize(&covariance);
        let information = spd_inverse(&covariance)?;
        Ok(Self { state, covariance, information })
    }

    /// Diagonal covariance with separate position and velocity deviations.
    pub fn diagonal(state: StateVector, sigma_position: f64, sigma_velocity: f64) -> Result<Self> {
        let (p, v) = (sigma_position * sigma_position, sigma_velocity * sigma_velocity);
        Self::new(state, Matrix6::from_diagonal(&StateVector::new(p, p, p, v, v, v)))
    }

    pub fn covariance(&self) -> &Matrix6<f64> {
        &self.covariance
    }

    pub fn information(&self) -> &Matrix6<f64> {
        &self.information
    }
}

/// Time update `P ← Φ P Φᵀ + Q`, with the state moved to `reference_state`.
pub fn predict(
    belief: &TargetBelief,
    reference_state: &StateVector,
    stm_step: &Stm,
    process_noise: &Matrix6<f64>,
) -> Result<TargetBelief> {
    let covariance = symmetrize(&(stm_step * belief.covariance * stm_step.transpose() + process_noise));
    let information = if process_noise.iter().all(|&q| q == 0.0) {
        let lu = stm_step.lu();
        let inv = lu.try_inverse().ok_or_else(|| Error::IllConditioned(f64::INFINITY))?;
        symmetrize(&(inv.transpose() * belief.information * inv))
    } else {
        spd_inverse(&covariance)?
    };
    Ok(TargetBelief { state: *reference_state, covariance, information })
}

/// Measurement update in information form: `P⁻¹ ← P⁻¹ + Hᵀ R⁻¹ H`.
pub fn update(belief: &TargetBelief, h: &Matrix3x6<f64>, r: &Matrix3<f64>) -> Result<TargetBelief> {
    if h.iter().all(|&v| v == 0.0) {
        return Ok(belief.clone());
    }
    let chol = ((r + r.transpose()) * 0.5).cholesky().ok_or(Error::SingularNoise)?;
    let information = symmetrize(&(belief.information + h.transpose() * chol.solve(h)));
    let cond = condition(&information);
    if cond > MAX_CONDITION {
        return Err(Error::IllConditioned(cond));
    }
    let covariance = spd_inverse(&information)?;
    Ok(TargetBelief { state: belief.state, covariance, information })
}

/// Belief of every target after the updates of each step, and at `t_L`.
#[derive(Debug, Clone)]
pub struct BeliefHistory {
    /// `beliefs[j][k]` for `k = 0..=L`.
    pub beliefs: Vec<Vec<TargetBelief>>,
    /// Initial information of each target, before any update.
    pub initial_information: Vec<Matrix6<f64>>,
    /// `Φ(t_0, t_L)` of each target from chained forward segments.
    pub transition: Vec<Stm>,
}

impl BeliefHistory {
    /// `P⁻¹(t_L) − Φ⁻ᵀ P⁻¹(t_0) Φ⁻¹` for target `j`.
    pub fn accumulated_information(&self, j: usize) -> Result<Matrix6<f64>> {
        let inv = self.transition[j].lu().try_inverse().ok_or_else(|| Error::IllConditioned(f64::INFINITY))?;
        let prior = inv.transpose() * self.initial_information[j] * inv;
        let last = self.beliefs[j].last().expect("history has a terminal belief");
        Ok(last.information - prior)
    }

    /// Sum over targets of the trace of the accumulated information.
    pub fn accumulated_trace(&self) -> Result<f64> {
        (0..self.beliefs.len()).map(|j| self.accumulated_information(j).map(|m| m.trace())).sum()
    }

    /// Writes `step,target,trace_P,trace_Pinv,det_P` rows ordered by step.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(b"step,target,trace_P,trace_Pinv,det_P\n")?;
        let steps = self.beliefs.first().map_or(0, |b| b.len());
        for k in 0..steps {
            for (j, history) in self.beliefs.iter().enumerate() {
                let b = &history[k];
                let row = csvfmt::line([
                    k.to_string(),
                    j.to_string(),
                    csvfmt::float(b.covariance.trace()),
                    csvfmt::float(b.information.trace()),
                    csvfmt::float(b.covariance.determinant()),
                ]);
                out.write_all(row.as_bytes())?;
            }
        }
        Ok(())
    }
}

/// Runs the recursion along the grid: at each step the scheduled
/// measurements are applied, then the beliefs are predicted to the next
/// epoch. Targets that are never observed only predict.
pub fn run_schedule(
    env: &Environment,
    phases: &PhaseVector,
    u: &ControlTensor,
    initial: &[TargetBelief],
    process_noise: &Matrix6<f64>,
) -> Result<BeliefHistory> {
    let (m, n, l) = (env.num_observers(), env.num_targets(), env.grid().steps);
    if u.shape() != (m, n, l) {
        return Err(Error::Shape(format!("control {:?} for a {m}x{n}x{l} scenario", u.shape())));
    }
    if initial.len() != n || phases.len() != m {
        return Err(Error::Shape(format!(
            "{} initial beliefs and {} phases for {n} targets and {m} observers",
            initial.len(),
            phases.len()
        )));
    }
    let observers: Vec<Vec<Vector3<f64>>> =
        (0..m).map(|i| env.observer_positions(i, phases[i])).collect::<Result<_>>()?;
    let epochs = env.grid().all_epochs();
    let r = env.measurement().noise_covariance();
    let runs: Vec<Result<(Vec<TargetBelief>, Stm)>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let track = env.track(j);
            let dynamics = env.targets()[j].orbit.dynamics();
            let mut belief = initial[j].clone();
            belief.state = track.states[0];
            let mut history = Vec::with_capacity(l + 1);
            let mut total = Stm::identity();
            for k in 0..l {
                let target = track.position(k);
                for (i, obs) in observers.iter().enumerate() {
                    if u.assignment(i, k) == Some(j) {
                        let h = env.measurement().observation_jacobian(&obs[k], &target).map_err(|e| e.for_observer(i))?;
                        belief = update(&belief, &h, &r)?;
                    }
                }
                history.push(belief.clone());
                let (_, stm) = dynamics.propagate_with_stm(&track.states[k], epochs[k], epochs[k + 1], env.settings())?;
                total = stm * total;
                belief = predict(&belief, &track.states[k + 1], &stm, process_noise)?;
            }
            history.push(belief);
            Ok((history, total))
        })
        .collect();
    let mut beliefs = Vec::with_capacity(n);
    let mut transition = Vec::with_capacity(n);
    for (j, run) in runs.into_iter().enumerate() {
        let (h, t) = run.map_err(|e| e.for_target(j))?;
        beliefs.push(h);
        transition.push(t);
    }
    Ok(BeliefHistory {
        beliefs,
        initial_information: initial.iter().map(|b| b.information).collect(),
        transition,
    })
}
