mod common;

use cislunar_ssa::catalog::{phase_to_state, sample_trajectory};
use cislunar_ssa::observation::info_matrix;
use cislunar_ssa::*;
use nalgebra::Vector3;

fn settings() -> PropagationSettings {
    PropagationSettings::default()
}

#[test]
fn sampled_states_match_one_shot_propagation() {
    let orbit = common::orbit("l2_lyap_large");
    let grid = TimeGrid::new(0.2, 3.1, 29).unwrap();
    let states = sample_trajectory(&orbit, 0.37, &grid.all_epochs(), &settings()).unwrap();
    for (k, t) in grid.all_epochs().into_iter().enumerate() {
        let direct = orbit.dynamics().propagate(&orbit.initial_state, 0.0, 0.37 * orbit.period + t, &settings()).unwrap();
        assert!((states[k] - direct).amax() < 1e-9, "epoch {k}");
    }
}

#[test]
fn subsampled_fine_grid_equals_coarse_grid() {
    let orbit = common::orbit("dro_large");
    let fine = TimeGrid::new(0.0, 2.0, 40).unwrap();
    let coarse = TimeGrid::new(0.0, 2.0, 20).unwrap();
    let a = sample_trajectory(&orbit, 0.1, &fine.all_epochs(), &settings()).unwrap();
    let b = sample_trajectory(&orbit, 0.1, &coarse.all_epochs(), &settings()).unwrap();
    for (k, s) in b.iter().enumerate() {
        assert!((a[2 * k] - s).amax() < 1e-10);
    }
}

#[test]
fn phase_shift_equals_epoch_shift() {
    let orbit = common::orbit("l1_lyap_large");
    let epochs: Vec<f64> = (0..6).map(|k| 0.3 * k as f64).collect();
    let delta = 0.15;
    let shifted = sample_trajectory(&orbit, 0.2 + delta, &epochs, &settings()).unwrap();
    for (k, t) in epochs.iter().enumerate() {
        let by_offset = phase_to_state(&orbit, 0.2, t + delta * orbit.period, &settings()).unwrap();
        assert!((shifted[k] - by_offset).amax() < 1e-9);
    }
}

#[test]
fn phase_is_period_one() {
    for orbit in common::catalog() {
        for p in [0.0, 0.3, 0.77] {
            let a = phase_to_state(&orbit, p, 0.0, &settings()).unwrap();
            let b = phase_to_state(&orbit, p + 1.0, 0.0, &settings()).unwrap();
            assert!((a - b).amax() < 1e-8);
        }
    }
}

#[test]
fn information_maps_match_direct_propagation() {
    let env = common::env(&["dro_small"], &[("l1_lyap_small", 0.25), ("dro_large", 0.6)], 12, MeasurementModel::default());
    let epochs = env.grid().all_epochs();
    let l = env.grid().steps;
    for j in 0..env.num_targets() {
        let track = env.track(j);
        let d = env.targets()[j].orbit.dynamics();
        for k in 0..l {
            // Backward map from the terminal epoch, and its inverse against the forward map.
            let (_, back) = d.propagate_with_stm(&track.states[l], epochs[l], epochs[k], &settings()).unwrap();
            let scale = back.amax();
            assert!((track.psi[k] - back).amax() < 1e-6 * scale.max(1.0), "target {j} step {k}");
            let (_, fwd) = d.propagate_with_stm(&track.states[k], epochs[k], epochs[l], &settings()).unwrap();
            let inv = track.psi[k].try_inverse().unwrap();
            assert!((inv - fwd).amax() < 1e-6 * fwd.amax().max(1.0), "target {j} step {k}");
        }
    }
}

/// Rebuilds one coefficient with long propagations from the catalog states.
fn oracle_entry(env: &Environment, phase: f64, i: usize, j: usize, k: usize) -> f64 {
    let grid = env.grid();
    let (tk, tl) = (grid.epoch(k), grid.epoch(grid.steps));
    let obs = &env.observers()[i];
    let tgt = &env.targets()[j];
    let obs_state = obs.dynamics().propagate(&obs.initial_state, 0.0, phase * obs.period + tk, &settings()).unwrap();
    let d = tgt.orbit.dynamics();
    let t0 = tgt.phase * tgt.orbit.period;
    let tgt_k = d.propagate(&tgt.orbit.initial_state, 0.0, t0 + tk, &settings()).unwrap();
    let tgt_l = d.propagate(&tgt.orbit.initial_state, 0.0, t0 + tl, &settings()).unwrap();
    let (_, psi) = d.propagate_with_stm(&tgt_l, tl, tk, &settings()).unwrap();
    let rel: Vector3<f64> = tgt_k.fixed_rows::<3>(0) - obs_state.fixed_rows::<3>(0);
    let h = env.measurement().observation_jacobian(&Vector3::zeros(), &rel).unwrap();
    info_matrix(&h, &env.measurement().noise_covariance(), &psi).unwrap().trace()
}

#[test]
fn tensor_matches_entrywise_recomputation() {
    let env = common::env(
        &["dro_small", "l2_lyap_large"],
        &[("l1_lyap_small", 0.1), ("l2_lyap_small", 0.55)],
        10,
        MeasurementModel::default(),
    );
    let x = PhaseVector::new(vec![0.3, 0.8]).unwrap();
    let a = env.build_info_tensor(&x).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..10 {
                let want = oracle_entry(&env, x[i], i, j, k);
                let got = a.get(i, j, k);
                assert!((got - want).abs() <= 1e-6 * want, "({i},{j},{k}): {got} vs {want}");
            }
        }
    }
}

#[test]
fn observer_slices_are_separable() {
    let env = common::env(
        &["dro_small", "l2_lyap_large", "dro_small"],
        &[("l1_lyap_small", 0.1), ("l2_lyap_small", 0.55)],
        30,
        MeasurementModel::default(),
    );
    let a = env.build_info_tensor(&PhaseVector::new(vec![0.3, 0.8, 0.1]).unwrap()).unwrap();
    let b = env.build_info_tensor(&PhaseVector::new(vec![0.3, 0.2, 0.6]).unwrap()).unwrap();
    assert_eq!(a.observer_block(0), b.observer_block(0));
    assert_ne!(a.observer_block(1), b.observer_block(1));
    // Each slice equals the single-observer environment's tensor.
    let solo = env.single_observer(2).build_info_tensor(&PhaseVector::new(vec![0.6]).unwrap()).unwrap();
    assert_eq!(solo.observer_block(0), b.observer_block(2));
}

#[test]
fn permuting_observers_permutes_the_tensor() {
    let env = common::env(&["dro_small", "l2_lyap_large"], &[("l1_lyap_small", 0.4)], 20, MeasurementModel::default());
    let a = env.build_info_tensor(&PhaseVector::new(vec![0.3, 0.8]).unwrap()).unwrap();
    let swapped = env.with_observers(vec![env.observers()[1].clone(), env.observers()[0].clone()]);
    let b = swapped.build_info_tensor(&PhaseVector::new(vec![0.8, 0.3]).unwrap()).unwrap();
    assert_eq!(a.observer_block(0), b.observer_block(1));
    assert_eq!(a.observer_block(1), b.observer_block(0));
}

#[test]
fn tensor_build_is_deterministic() {
    let env = common::env(&["dro_small", "l2_lyap_large", "dro_large"], &[("l1_lyap_small", 0.4)], 50, MeasurementModel::default());
    let x = PhaseVector::new(vec![0.1, 0.2, 0.3]).unwrap();
    let first = env.build_info_tensor(&x).unwrap();
    for _ in 0..5 {
        assert_eq!(env.build_info_tensor(&x).unwrap(), first);
    }
}

#[test]
fn coincident_observer_and_target_follow_the_policy() {
    let targets = [("dro_small", 0.4)];
    let strict = common::env(&["dro_small"], &targets, 10, MeasurementModel::default());
    let x = PhaseVector::new(vec![0.4]).unwrap();
    assert!(strict.build_info_tensor(&x).is_err());
    let clamp = MeasurementModel { close_approach: observation::CloseApproachPolicy::Clamp, ..MeasurementModel::default() };
    let a = strict.with_measurement(clamp).unwrap().build_info_tensor(&x).unwrap();
    assert!(a.as_slice().iter().all(|v| v.is_finite() && *v > 0.0));
}
