//! Angles-only measurement model and the information coefficient tensor.
//!
//! A measurement is the unit line-of-sight vector from an observer to a
//! target. Its Jacobian with respect to the target state is
//! `H = [(I − û ûᵀ)/ρ, 0]`, and with isotropic noise `R = σ² I` the
//! information contributed at `t_k`, expressed at the terminal epoch `t_L`, is
//! `Ψᵀ Hᵀ R⁻¹ H Ψ` where `Ψ` maps perturbations at `t_L` back to `t_k`.

use std::io::Write;

use nalgebra::{Matrix3, Matrix3x6, Matrix6, Vector3};
use serde::{Deserialize, Serialize};

use crate::catalog::TimeGrid;
use crate::csvfmt;
use crate::dynamics::Stm;
use crate::error::{Error, Result};

/// What to do when an observer comes within `rho_floor` of a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CloseApproachPolicy {
    #[default]
    Error,
    /// Use `ρ ← max(ρ, rho_floor)`.
    Clamp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementModel {
    /// Angular noise standard deviation per axis.
    pub sigma: f64,
    pub rho_floor: f64,
    pub close_approach: CloseApproachPolicy,
}

impl Default for MeasurementModel {
    fn default() -> Self {
        Self { sigma: 1e-5, rho_floor: 1e-6, close_approach: CloseApproachPolicy::Error }
    }
}

impl MeasurementModel {
    pub fn new(sigma: f64, rho_floor: f64, close_approach: CloseApproachPolicy) -> Result<Self> {
        let model = Self { sigma, rho_floor, close_approach };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidSettings(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.rho_floor >= 0.0 && self.rho_floor.is_finite()) {
            return Err(Error::InvalidSettings(format!(
                "rho_floor must be nonnegative, got {}",
                self.rho_floor
            )));
        }
        Ok(())
    }

    /// `R = σ² I₃`.
    pub fn noise_covariance(&self) -> Matrix3<f64> {
        Matrix3::identity() * (self.sigma * self.sigma)
    }

    /// Unit vector and effective separation, after the close-approach policy.
    fn geometry(&self, observer: &Vector3<f64>, target: &Vector3<f64>) -> Result<(Vector3<f64>, f64)> {
        let rel = target - observer;
        let rho = rel.norm();
        if rho > self.rho_floor {
            return Ok((rel / rho, rho));
        }
        match self.close_approach {
            CloseApproachPolicy::Error => Err(Error::CloseApproach { rho, floor: self.rho_floor }),
            CloseApproachPolicy::Clamp => {
                let u = if rho > 0.0 { rel / rho } else { Vector3::x() };
                // A zero floor with coincident points has no finite clamp.
                if self.rho_floor > 0.0 {
                    Ok((u, self.rho_floor))
                } else {
                    Err(Error::CloseApproach { rho, floor: self.rho_floor })
                }
            }
        }
    }

    /// Unit line of sight `û = (target − observer)/ρ`.
    pub fn los_measurement(&self, observer: &Vector3<f64>, target: &Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(self.geometry(observer, target)?.0)
    }

    /// Partial of the line of sight with respect to the 6-dimensional target
    /// state.
    pub fn observation_jacobian(
        &self,
        observer: &Vector3<f64>,
        target: &Vector3<f64>,
    ) -> Result<Matrix3x6<f64>> {
        let (u, rho) = self.geometry(observer, target)?;
        let mut h = Matrix3x6::zeros();
        h.fixed_view_mut::<3, 3>(0, 0).copy_from(&projector(&u, rho));
        Ok(h)
    }

    /// `tr(W · Hp G Hpᵀ)` with `W = R⁻¹`, where `G = Ψ_r Ψ_rᵀ` is built from
    /// the position rows of `Ψ`. Equivalent to `tr(info_matrix(H, R, Ψ))`.
    pub(crate) fn info_trace(
        &self,
        observer: &Vector3<f64>,
        target: &Vector3<f64>,
        gram: &Matrix3<f64>,
    ) -> Result<f64> {
        let (u, rho) = self.geometry(observer, target)?;
        let hp = projector(&u, rho);
        let t = (hp * gram * hp.transpose()).trace() / (self.sigma * self.sigma);
        // Roundoff can leave a tiny negative value for a PSD form.
        Ok(t.max(0.0))
    }
}

fn projector(u: &Vector3<f64>, rho: f64) -> Matrix3<f64> {
    (Matrix3::identity() - u * u.transpose()) / rho
}

/// Free-function form of [`MeasurementModel::los_measurement`].
pub fn los_measurement(
    observer: &Vector3<f64>,
    target: &Vector3<f64>,
    model: &MeasurementModel,
) -> Result<Vector3<f64>> {
    model.los_measurement(observer, target)
}

/// Free-function form of [`MeasurementModel::observation_jacobian`].
pub fn observation_jacobian(
    observer: &Vector3<f64>,
    target: &Vector3<f64>,
    model: &MeasurementModel,
) -> Result<Matrix3x6<f64>> {
    model.observation_jacobian(observer, target)
}

/// `Ψᵀ Hᵀ R⁻¹ H Ψ`, symmetrized.
pub fn info_matrix(h: &Matrix3x6<f64>, r: &Matrix3<f64>, psi: &Stm) -> Result<Matrix6<f64>> {
    let r_sym = (r + r.transpose()) * 0.5;
    let chol = r_sym.cholesky().ok_or(Error::SingularNoise)?;
    let hp = h * psi;
    let info = hp.transpose() * chol.solve(&hp);
    Ok((info + info.transpose()) * 0.5)
}

/// Nonnegative coefficients `A[i, j, k]` over observers × targets × steps.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoTensor {
    observers: usize,
    targets: usize,
    steps: usize,
    data: Vec<f64>,
    /// Grid the tensor was assembled on, if any.
    pub grid: Option<TimeGrid>,
    /// Digest of the scenario the tensor was assembled from, if any.
    pub scenario_hash: Option<String>,
}

impl InfoTensor {
    /// Builds a tensor from data laid out as `data[(i * N + j) * L + k]`.
    pub fn new(observers: usize, targets: usize, steps: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != observers * targets * steps {
            return Err(Error::Shape(format!(
                "{} entries for a {observers}x{targets}x{steps} tensor",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            let (i, j, k) = (pos / (targets * steps), (pos / steps) % targets, pos % steps);
            return Err(Error::Shape(format!(
                "entry ({i}, {j}, {k}) = {} is not a finite nonnegative number",
                data[pos]
            )));
        }
        Ok(Self { observers, targets, steps, data, grid: None, scenario_hash: None })
    }

    pub fn zeros(observers: usize, targets: usize, steps: usize) -> Self {
        Self {
            observers,
            targets,
            steps,
            data: vec![0.0; observers * targets * steps],
            grid: None,
            scenario_hash: None,
        }
    }

    /// Builds a tensor by evaluating `f(i, j, k)` for every entry.
    pub fn from_fn(
        observers: usize,
        targets: usize,
        steps: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(observers * targets * steps);
        for i in 0..observers {
            for j in 0..targets {
                for k in 0..steps {
                    data.push(f(i, j, k));
                }
            }
        }
        Self::new(observers, targets, steps, data)
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

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.targets + j) * self.steps + k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// The `N × L` block of observer `i`.
    pub fn observer_block(&self, i: usize) -> &[f64] {
        let n = self.targets * self.steps;
        &self.data[i * n..(i + 1) * n]
    }

    /// Single-observer sub-tensor `A[i, :, :]`.
    pub fn observer_slice(&self, i: usize) -> InfoTensor {
        InfoTensor {
            observers: 1,
            targets: self.targets,
            steps: self.steps,
            data: self.observer_block(i).to_vec(),
            grid: self.grid,
            scenario_hash: self.scenario_hash.clone(),
        }
    }

    /// Stacks single-observer blocks (each `N × L`) in order.
    pub(crate) fn from_blocks(targets: usize, steps: usize, blocks: Vec<Vec<f64>>) -> Result<Self> {
        let observers = blocks.len();
        let data = blocks.into_iter().flatten().collect();
        Self::new(observers, targets, steps, data)
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Writes `observer,target,step,coefficient` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(b"observer,target,step,coefficient\n")?;
        for i in 0..self.observers {
            for j in 0..self.targets {
                for k in 0..self.steps {
                    let row = csvfmt::line([
                        i.to_string(),
                        j.to_string(),
                        k.to_string(),
                        csvfmt::float(self.get(i, j, k)),
                    ]);
                    out.write_all(row.as_bytes())?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    #[test]
    fn axis_aligned_los() {
        let m = MeasurementModel::default();
        let u = m.los_measurement(&v(0.0, 0.0, 0.0), &v(2.0, 0.0, 0.0)).unwrap();
        assert_eq!(u, v(1.0, 0.0, 0.0));
    }

    #[test]
    fn close_approach_is_an_error_by_default() {
        let m = MeasurementModel::default();
        let err = m.los_measurement(&v(0.0, 0.0, 0.0), &v(1e-7, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::CloseApproach { .. }));
    }

    #[test]
    fn clamp_mode_caps_the_separation() {
        let m = MeasurementModel { close_approach: CloseApproachPolicy::Clamp, ..Default::default() };
        let h = m.observation_jacobian(&v(0.0, 0.0, 0.0), &v(1e-8, 0.0, 0.0)).unwrap();
        assert_eq!(h[(1, 1)], 1.0 / m.rho_floor);
        let h0 = m.observation_jacobian(&v(1.0, 1.0, 1.0), &v(1.0, 1.0, 1.0)).unwrap();
        assert!(h0.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn axis_aligned_jacobian() {
        let m = MeasurementModel::default();
        let rho = 3.0;
        let h = m.observation_jacobian(&v(0.0, 0.0, 0.0), &v(rho, 0.0, 0.0)).unwrap();
        let expect = Matrix3::from_diagonal(&v(0.0, 1.0 / rho, 1.0 / rho));
        assert!((h.fixed_view::<3, 3>(0, 0) - expect).amax() < 1e-15);
        assert_eq!(h.fixed_view::<3, 3>(0, 3).amax(), 0.0);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = MeasurementModel::default();
        let obs = v(0.1, -0.3, 0.05);
        let tgt = v(0.9, 0.2, -0.1);
        let h = m.observation_jacobian(&obs, &tgt).unwrap();
        let eps = 1e-6;
        for c in 0..6 {
            let mut fd = Vector3::zeros();
            if c < 3 {
                let mut p = tgt;
                let mut q = tgt;
                p[c] += eps;
                q[c] -= eps;
                fd = (m.los_measurement(&obs, &p).unwrap() - m.los_measurement(&obs, &q).unwrap())
                    / (2.0 * eps);
            }
            let col = h.column(c);
            let err = (col - fd).norm();
            assert!(err <= 1e-6 * col.norm().max(1e-12) || (c >= 3 && err == 0.0), "column {c}: {err}");
        }
    }

    #[test]
    fn identity_stm_trace_closed_form() {
        let sigma = 1e-3;
        let rho = 0.4;
        let m = MeasurementModel { sigma, ..Default::default() };
        let h = m.observation_jacobian(&v(0.0, 0.0, 0.0), &v(rho, 0.0, 0.0)).unwrap();
        let info = info_matrix(&h, &m.noise_covariance(), &Stm::identity()).unwrap();
        let expect = 2.0 / (rho * rho * sigma * sigma);
        assert!((info.trace() - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn singular_noise_rejected() {
        let h = Matrix3x6::zeros();
        assert!(matches!(
            info_matrix(&h, &Matrix3::zeros(), &Stm::identity()),
            Err(Error::SingularNoise)
        ));
    }

    #[test]
    fn tensor_rejects_bad_entries() {
        assert!(InfoTensor::new(1, 1, 2, vec![1.0]).is_err());
        assert!(InfoTensor::new(1, 1, 1, vec![-1.0]).is_err());
        assert!(InfoTensor::new(1, 1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn tensor_csv_layout() {
        let a = InfoTensor::new(1, 2, 1, vec![1.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "observer,target,step,coefficient\n0,0,0,1.0000000000000000e0\n0,1,0,2.0000000000000000e0\n"
        );
    }

    fn vec3() -> impl Strategy<Value = Vector3<f64>> {
        (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y, z)| v(x, y, z))
    }

    fn stm() -> impl Strategy<Value = Stm> {
        proptest::collection::vec(-3.0..3.0f64, 36).prop_map(|e| Stm::from_column_slice(&e))
    }

    proptest! {
        #[test]
        fn los_is_unit_and_antisymmetric(a in vec3(), b in vec3()) {
            prop_assume!((a - b).norm() > 1e-3);
            let m = MeasurementModel::default();
            let u = m.los_measurement(&a, &b).unwrap();
            prop_assert!((u.norm() - 1.0).abs() < 1e-12);
            let w = m.los_measurement(&b, &a).unwrap();
            prop_assert!((u + w).amax() < 1e-15);
        }

        #[test]
        fn jacobian_annihilates_radial(a in vec3(), b in vec3()) {
            prop_assume!((a - b).norm() > 1e-3);
            let m = MeasurementModel::default();
            let h = m.observation_jacobian(&a, &b).unwrap();
            let rel = b - a;
            let hr = h.fixed_view::<3, 3>(0, 0) * rel;
            prop_assert!(hr.amax() < 1e-12);
        }

        #[test]
        fn info_matrix_invariants(a in vec3(), b in vec3(), psi in stm(), scale in 0.1..10.0f64) {
            prop_assume!((a - b).norm() > 1e-2);
            let m = MeasurementModel { sigma: 0.1, ..Default::default() };
            let h = m.observation_jacobian(&a, &b).unwrap();
            let r = m.noise_covariance();
            let info = info_matrix(&h, &r, &psi).unwrap();
            let norm = info.amax().max(1.0);
            prop_assert!((info - info.transpose()).amax() <= 1e-10 * norm);
            let eig = info.symmetric_eigen().eigenvalues;
            prop_assert!(eig.iter().all(|&e| e >= -1e-10 * norm));
            prop_assert!(info.trace() >= 0.0);
            // At most two eigenvalues are significant.
            let mut sorted: Vec<f64> = eig.iter().map(|e| e.abs()).collect();
            sorted.sort_by(|x, y| y.total_cmp(x));
            prop_assert!(sorted[2] <= 1e-9 * norm);
            // Scaling R by c scales the information by 1/c.
            let scaled = info_matrix(&h, &(r * scale), &psi).unwrap();
            prop_assert!((scaled * scale - info).amax() <= 1e-10 * norm);
            // The fast trace agrees with the full matrix.
            let top = psi.fixed_rows::<3>(0).into_owned();
            let gram = top * top.transpose();
            let fast = m.info_trace(&a, &b, &gram).unwrap();
            prop_assert!((fast - info.trace()).abs() <= 1e-10 * info.trace().max(1.0));
        }

        #[test]
        fn trace_decreases_with_separation(r1 in 0.01..1.0f64, dr in 0.001..1.0f64) {
            let m = MeasurementModel { sigma: 1e-2, ..Default::default() };
            let r = m.noise_covariance();
            let t = |rho: f64| {
                let h = m.observation_jacobian(&Vector3::zeros(), &v(0.0, rho, 0.0)).unwrap();
                info_matrix(&h, &r, &Stm::identity()).unwrap().trace()
            };
            prop_assert!(t(r1 + dr) < t(r1));
        }
    }
}
