//! Generates the bundled Earth–Moon stand-in catalog with the single-shooting
//! corrector and writes it to stdout.
//!
//! ```text
//! cargo run -p cislunar-ssa --example build_catalog > data/earth_moon.csv
//! ```

use cislunar_ssa::catalog::{correct_symmetric_orbit, write_catalog, CorrectorMode, OrbitSpec};
use cislunar_ssa::dynamics::collinear_point;
use cislunar_ssa::{MassRatio, PropagationSettings, StateVector};

fn lyapunov_guess(mu: MassRatio, point: u8, amplitude: f64) -> StateVector {
    let m = mu.value();
    let xl = collinear_point(mu, point).unwrap()[0];
    let c2 = (1.0 - m) / (xl + m).abs().powi(3) + m / (xl - 1.0 + m).abs().powi(3);
    let omega = ((2.0 - c2 + (9.0 * c2 * c2 - 8.0 * c2).sqrt()) / 2.0).sqrt();
    let kappa = (omega * omega + 1.0 + 2.0 * c2) / (2.0 * omega);
    StateVector::new(xl - amplitude, 0.0, 0.0, 0.0, kappa * amplitude * omega, 0.0)
}

/// Walks a planar family outward from a small seed amplitude.
fn lyapunov(mu: MassRatio, point: u8, amplitude: f64, settings: &PropagationSettings) -> (StateVector, f64) {
    let seed = 0.002;
    let (mut ic, mut period) =
        correct_symmetric_orbit(mu, lyapunov_guess(mu, point, seed), CorrectorMode::PlanarFixedX, settings).unwrap();
    let xl = collinear_point(mu, point).unwrap()[0];
    let steps = ((amplitude - seed) / 0.002).ceil() as usize;
    let mut prev_a = seed;
    for s in 1..=steps {
        let a = seed + (amplitude - seed) * s as f64 / steps as f64;
        let mut guess = ic;
        guess[0] = xl - a;
        guess[4] = ic[4] * a / prev_a;
        prev_a = a;
        (ic, period) = correct_symmetric_orbit(mu, guess, CorrectorMode::PlanarFixedX, settings).unwrap();
    }
    (ic, period)
}

fn dro(mu: MassRatio, x0: f64, vy_guess: f64, settings: &PropagationSettings) -> (StateVector, f64) {
    let guess = StateVector::new(x0, 0.0, 0.0, 0.0, vy_guess, 0.0);
    correct_symmetric_orbit(mu, guess, CorrectorMode::PlanarFixedX, settings).unwrap()
}

fn main() {
    let mu = MassRatio::earth_moon();
    let settings = PropagationSettings::default();
    let mut orbits = Vec::new();
    let mut push = |id: &str, family: &str, (ic, period): (StateVector, f64)| {
        let orbit = OrbitSpec::new(id, family, mu, ic, period).unwrap();
        eprintln!("{id}: period {period:.6}, closure {:.2e}", orbit.closure_error(&settings).unwrap());
        orbits.push(orbit);
    };
    push("l1_lyap_small", "lyapunov", lyapunov(mu, 1, 0.01, &settings));
    push("l1_lyap_large", "lyapunov", lyapunov(mu, 1, 0.04, &settings));
    push("l2_lyap_small", "lyapunov", lyapunov(mu, 2, 0.01, &settings));
    push("l2_lyap_large", "lyapunov", lyapunov(mu, 2, 0.05, &settings));
    push("dro_small", "dro", dro(mu, 0.9, 0.4, &settings));
    push("dro_large", "dro", dro(mu, 0.8, 0.5, &settings));
    write_catalog(std::io::stdout().lock(), &orbits).unwrap();
}
