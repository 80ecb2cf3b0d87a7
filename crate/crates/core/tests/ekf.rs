mod common;

use cislunar_ssa::ekf::{predict, run_schedule, TargetBelief};
use cislunar_ssa::tasking::{evaluate_control, solve_max};
use cislunar_ssa::*;
use nalgebra::{Matrix6, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn validation_model() -> MeasurementModel {
    MeasurementModel { sigma: 1e-3, ..MeasurementModel::default() }
}

fn beliefs(env: &Environment) -> Vec<TargetBelief> {
    (0..env.num_targets())
        .map(|j| TargetBelief::diagonal(env.track(j).states[0], 1.0, 1.0).unwrap())
        .collect()
}

fn random_schedule(rng: &mut ChaCha8Rng, m: usize, n: usize, l: usize, density: f64) -> ControlTensor {
    let mut u = ControlTensor::empty(m, n, l);
    for i in 0..m {
        for k in 0..l {
            if rng.random::<f64>() < density {
                u.assign(i, k, Some(rng.random_range(0..n)));
            }
        }
    }
    u
}

#[test]
fn accumulated_information_matches_batch_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pairs = [("l2_lyap_large", "dro_small"), ("dro_small", "l1_lyap_small"), ("l1_lyap_small", "l2_lyap_small")];
    for trial in 0..6 {
        let (o, t) = pairs[trial % pairs.len()];
        let env = common::env(&[o], &[(t, rng.random())], 40, validation_model());
        let x = PhaseVector::new(vec![rng.random::<f64>()]).unwrap();
        let a = env.build_info_tensor(&x).unwrap();
        let u = random_schedule(&mut rng, 1, 1, 40, 0.5);
        let hist = run_schedule(&env, &x, &u, &beliefs(&env), &Matrix6::zeros()).unwrap();
        let batch = evaluate_control(&a, &u, ObjectiveKind::Max).unwrap();
        let rec = hist.accumulated_trace().unwrap();
        assert!((rec - batch).abs() <= 1e-6 * batch, "trial {trial}: recursive {rec} batch {batch}");
    }
}

#[test]
fn five_step_identity_per_observation() {
    // Each single observation reproduces its own tensor entry.
    let env = common::env(&["dro_small"], &[("l2_lyap_small", 0.3)], 5, validation_model());
    let x = PhaseVector::new(vec![0.1]).unwrap();
    let a = env.build_info_tensor(&x).unwrap();
    for k in 0..5 {
        let mut u = ControlTensor::empty(1, 1, 5);
        u.assign(0, k, Some(0));
        let hist = run_schedule(&env, &x, &u, &beliefs(&env), &Matrix6::zeros()).unwrap();
        let rec = hist.accumulated_trace().unwrap();
        assert!((rec - a.get(0, 0, k)).abs() <= 1e-6 * a.get(0, 0, k), "step {k}");
    }
}

#[test]
fn empty_schedule_is_pure_prediction() {
    let env = common::env(&["dro_small"], &[("l1_lyap_small", 0.0)], 10, validation_model());
    let x = PhaseVector::new(vec![0.2]).unwrap();
    let init = beliefs(&env);
    let hist = run_schedule(&env, &x, &ControlTensor::empty(1, 1, 10), &init, &Matrix6::zeros()).unwrap();
    let phi = hist.transition[0];
    let expected = phi * init[0].covariance() * phi.transpose();
    let last = hist.beliefs[0].last().unwrap().covariance();
    assert!((last - expected).amax() <= 1e-8 * expected.amax());
    let scale = hist.beliefs[0].last().unwrap().information().trace();
    assert!(hist.accumulated_trace().unwrap().abs() < 1e-9 * scale);
}

#[test]
fn additional_slot_never_increases_final_uncertainty() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let env = common::env(&["l2_lyap_large"], &[("dro_small", 0.4), ("l1_lyap_small", 0.7)], 20, validation_model());
    let x = PhaseVector::new(vec![0.6]).unwrap();
    let init = beliefs(&env);
    for _ in 0..5 {
        let u = random_schedule(&mut rng, 1, 2, 20, 0.3);
        let free: Vec<usize> = (0..20).filter(|&k| u.assignment(0, k).is_none()).collect();
        let Some(&k) = free.first() else { continue };
        let mut more = u.clone();
        let j = rng.random_range(0..2);
        more.assign(0, k, Some(j));
        let base = run_schedule(&env, &x, &u, &init, &Matrix6::zeros()).unwrap();
        let plus = run_schedule(&env, &x, &more, &init, &Matrix6::zeros()).unwrap();
        let tr = |h: &cislunar_ssa::ekf::BeliefHistory| h.beliefs[j].last().unwrap().covariance().trace();
        assert!(tr(&plus) <= tr(&base) * (1.0 + 1e-12));
    }
}

#[test]
fn optimal_schedule_dominates_myopic_in_filter_information() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let observers = ["dro_small", "l2_lyap_large", "l1_lyap_small"];
    let targets = ["l1_lyap_small", "l2_lyap_small", "dro_small"];
    for case in 0..20 {
        let o = observers[case % 3];
        let ts: Vec<(&str, f64)> = (0..2).map(|_| (targets[rng.random_range(0..3)], rng.random())).collect();
        if ts.iter().any(|t| t.0 == o) {
            continue;
        }
        // Half an orbit keeps the unstable targets within the filter's conditioning limit.
        let env = common::env_until(&[o], &ts, 1.5, 15, validation_model());
        let x = PhaseVector::new(vec![rng.random::<f64>()]).unwrap();
        let a = env.build_info_tensor(&x).unwrap();
        let opt = solve_max(&a).control;
        let myop = env.myopic_control(&x).unwrap();
        let total = |u: &ControlTensor| {
            let h = run_schedule(&env, &x, u, &beliefs(&env), &Matrix6::zeros()).unwrap();
            (0..2).map(|j| h.beliefs[j].last().unwrap().information().trace()).sum::<f64>()
        };
        let (fo, fm) = (total(&opt), total(&myop));
        assert!(fo >= fm * (1.0 - 1e-9), "case {case}: optimal {fo} myopic {fm}");
    }
}

#[test]
fn predicted_covariance_matches_monte_carlo() {
    let orbit = common::orbit("dro_small");
    let settings = PropagationSettings::default();
    let dynamics = orbit.dynamics();
    let x0 = orbit.initial_state;
    let (x1, phi) = dynamics.propagate_with_stm(&x0, 0.0, 0.1, &settings).unwrap();
    let sd = Vector6::new(1e-5, 2e-5, 1e-5, 3e-5, 1e-5, 2e-5);
    let p0 = Matrix6::from_diagonal(&sd.component_mul(&sd));
    let prior = TargetBelief::new(x0, p0).unwrap();
    let pred = predict(&prior, &x1, &phi, &Matrix6::zeros()).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let normal = rand_distr::StandardNormal;
    let samples = 10_000;
    let mut devs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let z = Vector6::from_fn(|_, _| rng.sample::<f64, _>(normal));
        let end = dynamics.propagate(&(x0 + sd.component_mul(&z)), 0.0, 0.1, &settings).unwrap();
        devs.push(end - x1);
    }
    let mean = devs.iter().fold(Vector6::zeros(), |acc, d| acc + d) / samples as f64;
    let cov = devs.iter().fold(Matrix6::zeros(), |acc, d| acc + (d - mean) * (d - mean).transpose()) / (samples as f64 - 1.0);
    for i in 0..6 {
        let (mc, lin) = (cov[(i, i)], pred.covariance()[(i, i)]);
        assert!((mc - lin).abs() <= 0.1 * lin, "component {i}: sample {mc} linear {lin}");
    }
}
