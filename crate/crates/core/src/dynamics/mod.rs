//! Circular restricted three-body dynamics in the rotating frame.
//!
//! All quantities are in canonical nondimensional units: the primaries are
//! separated by one length unit, revolve with unit angular rate, and sit at
//! `(-mu, 0, 0)` and `(1 - mu, 0, 0)`.

mod integrator;

use nalgebra::{Matrix3, Matrix6, SVector, Vector3, Vector6};

pub use integrator::{integrate, IntegrationStats, PropagationSettings};

use crate::error::{Error, Result};

/// Rotating-frame state `(x, y, z, vx, vy, vz)`.
pub type StateVector = Vector6<f64>;

/// State transition matrix mapping perturbations between two epochs.
pub type Stm = Matrix6<f64>;

/// Earth–Moon mass ratio.
pub const EARTH_MOON_MU: f64 = 0.012150585609624;

/// Default minimum distance to either primary.
pub const DEFAULT_SINGULAR_FLOOR: f64 = 1e-12;

/// Mass ratio `m2 / (m1 + m2)` of the primaries.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct MassRatio(f64);

impl MassRatio {
    pub fn new(mu: f64) -> Result<Self> {
        if mu.is_finite() && mu > 0.0 && mu <= 0.5 {
            Ok(Self(mu))
        } else {
            Err(Error::InvalidMassRatio(mu))
        }
    }

    pub fn earth_moon() -> Self {
        Self(EARTH_MOON_MU)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// The CR3BP vector field for a fixed mass ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cr3bp {
    mu: f64,
    singular_floor: f64,
}

impl Cr3bp {
    pub fn new(mu: MassRatio) -> Self {
        Self { mu: mu.value(), singular_floor: DEFAULT_SINGULAR_FLOOR }
    }

    pub fn with_singular_floor(mut self, floor: f64) -> Self {
        self.singular_floor = floor;
        self
    }

    pub fn mu(&self) -> MassRatio {
        MassRatio(self.mu)
    }

    /// Distances to the larger and smaller primary.
    pub fn primary_distances(&self, pos: &Vector3<f64>) -> Result<(f64, f64)> {
        let (x, y, z) = (pos[0], pos[1], pos[2]);
        let r1 = ((x + self.mu).powi(2) + y * y + z * z).sqrt();
        let r2 = ((x - 1.0 + self.mu).powi(2) + y * y + z * z).sqrt();
        if !(r1 > self.singular_floor && r2 > self.singular_floor) {
            return Err(Error::SingularPosition { x, y, z, floor: self.singular_floor });
        }
        Ok((r1, r2))
    }

    pub fn potential(&self, pos: &Vector3<f64>) -> Result<f64> {
        let (r1, r2) = self.primary_distances(pos)?;
        Ok(0.5 * (pos[0] * pos[0] + pos[1] * pos[1]) + (1.0 - self.mu) / r1 + self.mu / r2)
    }

    /// Gradient of the effective potential.
    pub fn potential_gradient(&self, pos: &Vector3<f64>) -> Result<Vector3<f64>> {
        let (r1, r2) = self.primary_distances(pos)?;
        let (x, y, z) = (pos[0], pos[1], pos[2]);
        let m1 = (1.0 - self.mu) / r1.powi(3);
        let m2 = self.mu / r2.powi(3);
        Ok(Vector3::new(
            x - m1 * (x + self.mu) - m2 * (x - 1.0 + self.mu),
            y - m1 * y - m2 * y,
            -m1 * z - m2 * z,
        ))
    }

    /// Hessian of the effective potential.
    pub fn potential_hessian(&self, pos: &Vector3<f64>) -> Result<Matrix3<f64>> {
        let (r1, r2) = self.primary_distances(pos)?;
        let d1 = Vector3::new(pos[0] + self.mu, pos[1], pos[2]);
        let d2 = Vector3::new(pos[0] - 1.0 + self.mu, pos[1], pos[2]);
        let m1 = 1.0 - self.mu;
        let m2 = self.mu;
        let mut hess = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0));
        hess -= Matrix3::identity() * (m1 / r1.powi(3) + m2 / r2.powi(3));
        hess += d1 * d1.transpose() * (3.0 * m1 / r1.powi(5));
        hess += d2 * d2.transpose() * (3.0 * m2 / r2.powi(5));
        Ok(hess)
    }

    /// Time derivative of the state.
    pub fn eom(&self, state: &StateVector) -> Result<StateVector> {
        let pos = state.fixed_rows::<3>(0).into_owned();
        let grad = self.potential_gradient(&pos)?;
        Ok(Vector6::new(
            state[3],
            state[4],
            state[5],
            2.0 * state[4] + grad[0],
            -2.0 * state[3] + grad[1],
            grad[2],
        ))
    }

    /// Jacobian of [`Cr3bp::eom`] with respect to the state.
    pub fn eom_jacobian(&self, state: &StateVector) -> Result<Matrix6<f64>> {
        let pos = state.fixed_rows::<3>(0).into_owned();
        let hess = self.potential_hessian(&pos)?;
        let mut jac = Matrix6::zeros();
        jac.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
        jac.fixed_view_mut::<3, 3>(3, 0).copy_from(&hess);
        jac[(3, 4)] = 2.0;
        jac[(4, 3)] = -2.0;
        Ok(jac)
    }

    pub fn jacobi_constant(&self, state: &StateVector) -> Result<f64> {
        let pos = state.fixed_rows::<3>(0).into_owned();
        let v2 = state.fixed_rows::<3>(3).norm_squared();
        Ok(2.0 * self.potential(&pos)? - v2)
    }

    pub fn propagate(
        &self,
        state: &StateVector,
        t0: f64,
        t1: f64,
        settings: &PropagationSettings,
    ) -> Result<StateVector> {
        let (y, _) = integrate(|_t, y: &StateVector| self.eom(y), t0, state, t1, settings)?;
        Ok(y)
    }

    /// Propagates the state together with the 36 variational equations.
    pub fn propagate_with_stm(
        &self,
        state: &StateVector,
        t0: f64,
        t1: f64,
        settings: &PropagationSettings,
    ) -> Result<(StateVector, Stm)> {
        let mut y0 = SVector::<f64, 42>::zeros();
        y0.fixed_rows_mut::<6>(0).copy_from(state);
        for i in 0..6 {
            y0[6 + 7 * i] = 1.0;
        }
        let rhs = |_t: f64, y: &SVector<f64, 42>| -> Result<SVector<f64, 42>> {
            let s = y.fixed_rows::<6>(0).into_owned();
            let jac = self.eom_jacobian(&s)?;
            let phi = Matrix6::from_column_slice(&y.as_slice()[6..]);
            let dphi = jac * phi;
            let mut out = SVector::<f64, 42>::zeros();
            out.fixed_rows_mut::<6>(0).copy_from(&self.eom(&s)?);
            out.as_mut_slice()[6..].copy_from_slice(dphi.as_slice());
            Ok(out)
        };
        let (y, _) = integrate(rhs, t0, &y0, t1, settings)?;
        let state = y.fixed_rows::<6>(0).into_owned();
        let stm = Matrix6::from_column_slice(&y.as_slice()[6..]);
        Ok((state, stm))
    }
}

/// Effective potential `U = (x² + y²)/2 + (1 − μ)/r1 + μ/r2`.
pub fn effective_potential(pos: &Vector3<f64>, mu: MassRatio) -> Result<f64> {
    Cr3bp::new(mu).potential(pos)
}

pub fn eom(state: &StateVector, mu: MassRatio) -> Result<StateVector> {
    Cr3bp::new(mu).eom(state)
}

/// Jacobi integral `C = 2U − |v|²`.
pub fn jacobi_constant(state: &StateVector, mu: MassRatio) -> Result<f64> {
    Cr3bp::new(mu).jacobi_constant(state)
}

pub fn propagate(
    state: &StateVector,
    t0: f64,
    t1: f64,
    mu: MassRatio,
    settings: &PropagationSettings,
) -> Result<StateVector> {
    Cr3bp::new(mu).propagate(state, t0, t1, settings)
}

pub fn propagate_with_stm(
    state: &StateVector,
    t0: f64,
    t1: f64,
    mu: MassRatio,
    settings: &PropagationSettings,
) -> Result<(StateVector, Stm)> {
    Cr3bp::new(mu).propagate_with_stm(state, t0, t1, settings)
}

/// The equilateral libration point `L4`.
pub fn l4_point(mu: MassRatio) -> Vector3<f64> {
    Vector3::new(0.5 - mu.value(), 3f64.sqrt() / 2.0, 0.0)
}

/// Position of a collinear libration point (1, 2 or 3) found by Newton
/// iteration on `dU/dx = 0` along the x axis.
pub fn collinear_point(mu: MassRatio, which: u8) -> Result<Vector3<f64>> {
    let m = mu.value();
    let sys = Cr3bp::new(mu);
    let mut x = match which {
        1 => 1.0 - m - (m / 3.0).cbrt(),
        2 => 1.0 - m + (m / 3.0).cbrt(),
        3 => -1.0 - 5.0 * m / 12.0,
        _ => return Err(Error::InvalidSettings(format!("no collinear point L{which}"))),
    };
    for _ in 0..100 {
        let p = Vector3::new(x, 0.0, 0.0);
        let g = sys.potential_gradient(&p)?[0];
        let h = sys.potential_hessian(&p)?[(0, 0)];
        let dx = g / h;
        x -= dx;
        if dx.abs() < 1e-15 {
            break;
        }
    }
    Ok(Vector3::new(x, 0.0, 0.0))
}
