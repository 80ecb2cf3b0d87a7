#![allow(dead_code)]

use std::path::PathBuf;

use cislunar_ssa::catalog::{load_catalog, LoadOptions};
use cislunar_ssa::environment::Target;
use cislunar_ssa::*;

pub fn catalog_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/earth_moon.csv")
}

pub fn catalog() -> Vec<OrbitSpec> {
    let file = std::fs::File::open(catalog_path()).expect("catalog file");
    load_catalog(file, &LoadOptions::default()).expect("catalog parses and closes")
}

pub fn orbit(id: &str) -> OrbitSpec {
    catalog().into_iter().find(|o| o.id == id).unwrap_or_else(|| panic!("no orbit {id}"))
}

pub fn target(id: &str, phase: f64) -> Target {
    Target { orbit: orbit(id), phase }
}

/// Environment over one period of the longest target orbit.
pub fn env(observers: &[&str], targets: &[(&str, f64)], steps: usize, measurement: MeasurementModel) -> Environment {
    let t_end = targets.iter().map(|&(id, _)| orbit(id).period).fold(0.0, f64::max);
    env_until(observers, targets, t_end, steps, measurement)
}

pub fn env_until(
    observers: &[&str],
    targets: &[(&str, f64)],
    t_end: f64,
    steps: usize,
    measurement: MeasurementModel,
) -> Environment {
    let targets: Vec<Target> = targets.iter().map(|&(id, p)| target(id, p)).collect();
    let grid = TimeGrid::new(0.0, t_end, steps).unwrap();
    let observers = observers.iter().map(|id| orbit(id)).collect();
    Environment::new(grid, PropagationSettings::default(), measurement, observers, targets).unwrap()
}
