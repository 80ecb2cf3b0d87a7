//! Periodic-orbit catalog: CSV ingestion with closure validation, phase
//! parameterization and trajectory sampling on a time grid.
//!
//! A phase is the elapsed fraction of an orbit's period measured from its
//! catalog initial condition, so phase `p` at epoch `t` is the state reached
//! after propagating the initial condition for `p * period + t`.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, Vector6};

use crate::csvfmt;
use crate::dynamics::{Cr3bp, MassRatio, PropagationSettings, StateVector};
use crate::error::{Error, Result};

/// Header line of the catalog CSV format.
pub const CATALOG_HEADER: &str = "id,family,mu,x,y,z,vx,vy,vz,period";

/// Default per-component closure tolerance checked at load time.
pub const DEFAULT_CLOSURE_TOL: f64 = 1e-6;

/// One periodic orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSpec {
    pub id: String,
    pub family: String,
    pub mu: MassRatio,
    pub initial_state: StateVector,
    pub period: f64,
}

impl OrbitSpec {
    pub fn new(
        id: impl Into<String>,
        family: impl Into<String>,
        mu: MassRatio,
        initial_state: StateVector,
        period: f64,
    ) -> Result<Self> {
        let id = id.into();
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidSettings(format!("orbit '{id}' has non-positive period {period}")));
        }
        if !initial_state.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidSettings(format!("orbit '{id}' has a non-finite initial state")));
        }
        Ok(Self { id, family: family.into(), mu, initial_state, period })
    }

    pub fn dynamics(&self) -> Cr3bp {
        Cr3bp::new(self.mu)
    }

    /// Largest absolute component difference after one period.
    pub fn closure_error(&self, settings: &PropagationSettings) -> Result<f64> {
        let end = self.dynamics().propagate(&self.initial_state, 0.0, self.period, settings)?;
        Ok((end - self.initial_state).amax())
    }

    pub fn check_closure(&self, tolerance: f64, settings: &PropagationSettings) -> Result<()> {
        let error = self.closure_error(settings)?;
        if error.is_finite() && error <= tolerance {
            Ok(())
        } else {
            Err(Error::ClosureViolation { id: self.id.clone(), error, tolerance })
        }
    }
}

/// Wraps a phase into `[0, 1)`.
pub fn wrap_phase(phase: f64) -> f64 {
    let w = phase.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs.
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Initial phases of the observers, one entry per observer, each in `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector(Vec<f64>);

impl PhaseVector {
    /// Builds a phase vector, wrapping every entry into `[0, 1)`.
    pub fn new(phases: impl Into<Vec<f64>>) -> Result<Self> {
        let mut v: Vec<f64> = phases.into();
        for p in v.iter_mut() {
            if !p.is_finite() {
                return Err(Error::NonFiniteObjective { x: vec![*p] });
            }
            *p = wrap_phase(*p);
        }
        Ok(Self(v))
    }

    pub fn uniform(len: usize, phase: f64) -> Self {
        Self(vec![wrap_phase(phase); len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for PhaseVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A uniform time grid with `steps` observation epochs `t_0 .. t_{L-1}` and
/// the terminal epoch `t_L = t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::InvalidSettings(format!(
                "time grid needs steps >= 1 and t_end > t_start (got {steps} steps on [{t_start}, {t_end}])"
            )));
        }
        Ok(Self { t_start, t_end, steps })
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.steps as f64
    }

    pub fn epoch(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_end
        } else {
            self.t_start + k as f64 * self.dt()
        }
    }

    /// The `L` observation epochs.
    pub fn observation_epochs(&self) -> Vec<f64> {
        (0..self.steps).map(|k| self.epoch(k)).collect()
    }

    /// All `L + 1` epochs including the terminal one.
    pub fn all_epochs(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.epoch(k)).collect()
    }
}

/// Options for [`load_catalog`].
#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub validate: bool,
    pub closure_tol: f64,
    pub settings: PropagationSettings,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { validate: true, closure_tol: DEFAULT_CLOSURE_TOL, settings: PropagationSettings::default() }
    }
}

/// Parses a catalog CSV stream. Parse errors carry the physical line number.
pub fn load_catalog<R: Read>(mut source: R, options: &LoadOptions) -> Result<Vec<OrbitSpec>> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    // The csv reader's record positions include preceding comment lines, so
    // recover the physical line of the record itself.
    let line_of = |pos: Option<&csv::Position>| {
        let Some(p) = pos else { return 0 };
        let start = p.byte() as usize;
        let mut line = text.as_bytes()[..start].iter().filter(|&&b| b == b'\n').count() + 1;
        for l in text[start..].lines() {
            let t = l.trim();
            if !(t.is_empty() || t.starts_with('#')) {
                break;
            }
            line += 1;
        }
        line
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let header_error = |row: usize, message: String| Error::CatalogParse { row, message };
    let headers = reader.headers().map_err(|e| header_error(1, e.to_string()))?.clone();
    let header_row = line_of(headers.position()).max(1);
    if headers.iter().collect::<Vec<_>>().join(",") != CATALOG_HEADER {
        return Err(header_error(
            header_row,
            format!("expected header '{CATALOG_HEADER}', found '{}'", headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }

    let mut orbits: Vec<OrbitSpec> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = line_of(e.position());
            Error::CatalogParse { row, message: e.to_string() }
        })?;
        let row = line_of(record.position());
        let parse_err = |message: String| Error::CatalogParse { row, message };
        if record.len() != 10 {
            return Err(parse_err(format!("expected 10 fields, found {}", record.len())));
        }
        let num = |i: usize, name: &str| -> Result<f64> {
            record[i].parse::<f64>().map_err(|e| parse_err(format!("field '{name}' = '{}': {e}", &record[i])))
        };
        let mu = MassRatio::new(num(2, "mu")?).map_err(|e| parse_err(e.to_string()))?;
        let state = Vector6::new(
            num(3, "x")?,
            num(4, "y")?,
            num(5, "z")?,
            num(6, "vx")?,
            num(7, "vy")?,
            num(8, "vz")?,
        );
        let period = num(9, "period")?;
        if record[0].is_empty() {
            return Err(parse_err("empty orbit id".into()));
        }
        let orbit = OrbitSpec::new(&record[0], &record[1], mu, state, period).map_err(|e| parse_err(e.to_string()))?;
        if orbits.iter().any(|o| o.id == orbit.id) {
            return Err(parse_err(format!("duplicate orbit id '{}'", orbit.id)));
        }
        orbits.push(orbit);
    }
    if options.validate {
        for orbit in &orbits {
            orbit.check_closure(options.closure_tol, &options.settings)?;
        }
    }
    Ok(orbits)
}

/// Writes orbits in the catalog CSV format.
pub fn write_catalog<W: Write>(mut out: W, orbits: &[OrbitSpec]) -> Result<()> {
    out.write_all(CATALOG_HEADER.as_bytes())?;
    out.write_all(b"\n")?;
    for o in orbits {
        let mut fields = vec![o.id.clone(), o.family.clone(), csvfmt::float(o.mu.value())];
        fields.extend(o.initial_state.iter().map(|v| csvfmt::float(*v)));
        fields.push(csvfmt::float(o.period));
        out.write_all(csvfmt::line(fields).as_bytes())?;
    }
    Ok(())
}

/// State on `orbit` at `phase` (wrapped into `[0, 1)`) after an additional
/// `epoch_offset` of elapsed time.
pub fn phase_to_state(
    orbit: &OrbitSpec,
    phase: f64,
    epoch_offset: f64,
    settings: &PropagationSettings,
) -> Result<StateVector> {
    let t = wrap_phase(phase) * orbit.period + epoch_offset;
    orbit.dynamics().propagate(&orbit.initial_state, 0.0, t, settings)
}

/// States on `orbit` at `phase` for each of `epochs` (nondecreasing), obtained
/// by sequential propagation between consecutive epochs.
pub fn sample_trajectory(
    orbit: &OrbitSpec,
    phase: f64,
    epochs: &[f64],
    settings: &PropagationSettings,
) -> Result<Vec<StateVector>> {
    let Some(&first) = epochs.first() else {
        return Ok(Vec::new());
    };
    if epochs.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidSettings("sample epochs must be nondecreasing".into()));
    }
    let dynamics = orbit.dynamics();
    let offset = wrap_phase(phase) * orbit.period;
    let mut states = Vec::with_capacity(epochs.len());
    let mut state = phase_to_state(orbit, phase, first, settings)?;
    states.push(state);
    for w in epochs.windows(2) {
        state = dynamics.propagate(&state, offset + w[0], offset + w[1], settings)?;
        states.push(state);
    }
    Ok(states)
}

/// Which initial-condition components the corrector may adjust.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectorMode {
    /// Planar orbit: hold `x0`, adjust `vy0`, target `vx = 0` at the half period.
    PlanarFixedX,
    /// Spatial orbit: hold `z0`, adjust `x0` and `vy0`, target `vx = vz = 0`.
    SpatialFixedZ,
}

/// Single-shooting differential corrector for orbits symmetric about the
/// x–z plane. `guess` must have the form `(x0, 0, z0, 0, vy0, 0)` with
/// `vy0 != 0`.
///
/// Returns the corrected initial condition and the full period.
pub fn correct_symmetric_orbit(
    mu: MassRatio,
    guess: StateVector,
    mode: CorrectorMode,
    settings: &PropagationSettings,
) -> Result<(StateVector, f64)> {
    let dynamics = Cr3bp::new(mu);
    let mut state = guess;
    state[1] = 0.0;
    state[3] = 0.0;
    state[5] = 0.0;
    let (free, constrained): (&[usize], &[usize]) = match mode {
        CorrectorMode::PlanarFixedX => (&[4], &[3]),
        CorrectorMode::SpatialFixedZ => (&[0, 4], &[3, 5]),
    };
    for _ in 0..50 {
        let half = half_period_crossing(&dynamics, &state, settings)?;
        let (end, stm) = dynamics.propagate_with_stm(&state, 0.0, half, settings)?;
        let deriv = dynamics.eom(&end)?;
        let residual = DVector::from_iterator(constrained.len(), constrained.iter().map(|&c| end[c]));
        if residual.amax() < 1e-12 {
            return Ok((state, 2.0 * half));
        }
        let mut jac = DMatrix::zeros(constrained.len(), free.len());
        for (r, &c) in constrained.iter().enumerate() {
            for (q, &f) in free.iter().enumerate() {
                jac[(r, q)] = stm[(c, f)] - deriv[c] / deriv[1] * stm[(1, f)];
            }
        }
        let delta = jac
            .lu()
            .solve(&residual)
            .ok_or_else(|| Error::InvalidSettings("singular corrector Jacobian".into()))?;
        for (q, &f) in free.iter().enumerate() {
            state[f] -= delta[q];
        }
        if !state.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    Err(Error::InvalidSettings("differential corrector did not converge".into()))
}

/// Time of the first return to the plane `y = 0`.
fn half_period_crossing(dynamics: &Cr3bp, state: &StateVector, settings: &PropagationSettings) -> Result<f64> {
    const CHUNK: f64 = 0.02;
    const MAX_TIME: f64 = 50.0;
    let mut t = 0.0;
    let mut s = *state;
    // Leave the plane before watching for a sign change.
    let start_sign = state[4].signum();
    let next_y = loop {
        let next = dynamics.propagate(&s, t, t + CHUNK, settings)?;
        if t > 0.0 && next[1] * start_sign < 0.0 {
            break next[1];
        }
        s = next;
        t += CHUNK;
        if t > MAX_TIME {
            return Err(Error::InvalidSettings("no plane crossing found".into()));
        }
    };
    // Newton on y(t) = 0 from the last state before the crossing.
    let mut tc = t + CHUNK * s[1] / (s[1] - next_y);
    for _ in 0..50 {
        let at = dynamics.propagate(&s, t, tc, settings)?;
        let dt = at[1] / at[4];
        tc -= dt;
        if dt.abs() < 1e-15 {
            break;
        }
    }
    Ok(tc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{collinear_point, l4_point};

    fn lyapunov_l1() -> OrbitSpec {
        let mu = MassRatio::earth_moon();
        let xl = collinear_point(mu, 1).unwrap()[0];
        let guess = Vector6::new(xl - 0.01, 0.0, 0.0, 0.0, 0.08, 0.0);
        let settings = PropagationSettings::default();
        let (ic, period) = correct_symmetric_orbit(mu, guess, CorrectorMode::PlanarFixedX, &settings).unwrap();
        OrbitSpec::new("l1", "lyapunov", mu, ic, period).unwrap()
    }

    #[test]
    fn wrap_phase_edges() {
        assert_eq!(wrap_phase(0.0), 0.0);
        assert_eq!(wrap_phase(1.0), 0.0);
        assert_eq!(wrap_phase(-1e-20), 0.0);
        assert!((wrap_phase(-0.25) - 0.75).abs() < 1e-15);
        assert!((wrap_phase(2.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn header_only_catalog_is_empty() {
        let orbits = load_catalog(format!("{CATALOG_HEADER}\n").as_bytes(), &LoadOptions::default()).unwrap();
        assert!(orbits.is_empty());
    }

    #[test]
    fn equilibrium_orbit_passes_closure() {
        let mu = MassRatio::earth_moon();
        let p = l4_point(mu);
        let text = format!(
            "# equilibrium\n{CATALOG_HEADER}\nl4,equilibrium,{},{},{},0,0,0,0,3.5\n",
            mu.value(),
            p[0],
            p[1]
        );
        let orbits = load_catalog(text.as_bytes(), &LoadOptions::default()).unwrap();
        assert_eq!(orbits.len(), 1);
        assert_eq!(orbits[0].family, "equilibrium");
    }

    #[test]
    fn parse_errors_carry_row_numbers() {
        let text = format!("{CATALOG_HEADER}\n# note\na,halo,0.01,1,0,0,0,0.1,oops,2.0\n");
        match load_catalog(text.as_bytes(), &LoadOptions::default()) {
            Err(Error::CatalogParse { row, .. }) => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            load_catalog("id,family\n".as_bytes(), &LoadOptions::default()),
            Err(Error::CatalogParse { row: 1, .. })
        ));
    }

    #[test]
    fn closure_violation_names_orbit() {
        let text = format!("{CATALOG_HEADER}\nbad,lyapunov,0.012150585609624,0.8,0,0,0,0.3,0,2.0\n");
        match load_catalog(text.as_bytes(), &LoadOptions::default()) {
            Err(Error::ClosureViolation { id, .. }) => assert_eq!(id, "bad"),
            other => panic!("unexpected {other:?}"),
        }
        let lenient = LoadOptions { validate: false, ..Default::default() };
        assert_eq!(load_catalog(text.as_bytes(), &lenient).unwrap().len(), 1);
    }

    #[test]
    fn corrected_lyapunov_round_trips_through_csv() {
        let orbit = lyapunov_l1();
        let mut buf = Vec::new();
        write_catalog(&mut buf, std::slice::from_ref(&orbit)).unwrap();
        let loaded = load_catalog(buf.as_slice(), &LoadOptions::default()).unwrap();
        assert_eq!(loaded[0], orbit);
    }

    #[test]
    fn zero_phase_is_initial_state() {
        let orbit = lyapunov_l1();
        let s = phase_to_state(&orbit, 0.0, 0.0, &PropagationSettings::default()).unwrap();
        assert_eq!(s, orbit.initial_state);
    }

    #[test]
    fn phase_wraps_periodically() {
        let orbit = lyapunov_l1();
        let settings = PropagationSettings::default();
        let eps = 1e-3;
        let a = phase_to_state(&orbit, 1.0 - eps, 0.0, &settings).unwrap();
        let b = phase_to_state(&orbit, -eps, 0.0, &settings).unwrap();
        assert!((a - b).amax() < 1e-12);
        let c = phase_to_state(&orbit, 0.3, 0.0, &settings).unwrap();
        let d = phase_to_state(&orbit, 1.3, 0.0, &settings).unwrap();
        assert!((c - d).amax() < 1e-8);
    }

    #[test]
    fn half_phase_matches_direct_propagation() {
        let orbit = lyapunov_l1();
        let settings = PropagationSettings::default();
        let s = phase_to_state(&orbit, 0.5, 0.0, &settings).unwrap();
        let direct = orbit.dynamics().propagate(&orbit.initial_state, 0.0, orbit.period / 2.0, &settings).unwrap();
        assert_eq!(s, direct);
        // Half a period of a symmetric orbit lands back on the x axis.
        assert!(s[1].abs() < 1e-9 && s[3].abs() < 1e-9);
    }

    #[test]
    fn single_epoch_sample() {
        let orbit = lyapunov_l1();
        let settings = PropagationSettings::default();
        let states = sample_trajectory(&orbit, 0.2, &[0.4], &settings).unwrap();
        assert_eq!(states, vec![phase_to_state(&orbit, 0.2, 0.4, &settings).unwrap()]);
    }

    #[test]
    fn time_grid_contract() {
        let g = TimeGrid::new(1.0, 3.0, 4).unwrap();
        assert_eq!(g.all_epochs(), vec![1.0, 1.5, 2.0, 2.5, 3.0]);
        assert_eq!(g.observation_epochs().len(), 4);
        assert!(TimeGrid::new(0.0, 0.0, 3).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn phase_vector_wraps() {
        let p = PhaseVector::new(vec![1.25, -0.5, 0.0]).unwrap();
        assert_eq!(p.as_slice(), &[0.25, 0.5, 0.0]);
        assert!(PhaseVector::new(vec![f64::NAN]).is_err());
    }
}
