mod common;

use std::sync::Arc;

use common::*;
use dyngame::game::primitives::FnDynamics;
use dyngame::gradient::{PlayerVerdict, playerwise_minimizer_check, pseudo_gradient, pseudo_gradient_of_actions};
use dyngame::GameBuilder;
use nalgebra::DVector;
use proptest::prelude::*;

#[test]
fn rollout_matches_direct_recurrence() {
    let mut r = rng(1);
    let game = random_smooth_game(&mut r, 3, 2, &[1, 2]);
    let acts: Vec<DVector<f64>> = (0..4).map(|_| rand_vec(&mut r, 3, 1.0)).collect();
    let tr = game.rollout(&acts).unwrap();
    let mut x = game.initial_state().clone();
    for k in 0..3 {
        x = game.dynamics(k).step(&x, &acts[k]);
        assert!((&x - &tr.states[k + 1]).amax() <= 1e-12 * (1.0 + x.amax()));
    }
}

#[test]
fn player_costs_match_naive_sum() {
    let mut r = rng(2);
    let spec = random_lq(&mut r, 4, 2, &[1, 1], 1.0);
    let game = spec.build();
    let acts: Vec<DVector<f64>> = (0..5).map(|_| rand_vec(&mut r, 2, 1.0)).collect();
    let tr = game.rollout(&acts).unwrap();
    let costs = game.player_costs(&tr);
    for n in 0..2 {
        let naive: f64 = (0..=4)
            .map(|k| {
                let z = stack_z(&tr.states[k], &acts[k]);
                0.5 * z.dot(&(&spec.q[n][k] * &z))
            })
            .sum();
        assert!((naive - costs[n]).abs() < 1e-10 * (1.0 + naive.abs()));
    }
}

#[test]
fn lq_gradient_matches_stacked_oracle() {
    let mut r = rng(3);
    let spec = random_lq(&mut r, 5, 3, &[2, 1], 1.0);
    let game = spec.build();
    let acts: Vec<DVector<f64>> = (0..6).map(|_| rand_vec(&mut r, 3, 1.0)).collect();
    let (_, g) = pseudo_gradient_of_actions(&game, &acts).unwrap();
    let (m, mv, ..) = spec.stacked();
    let u = DVector::from_iterator(18, acts.iter().flat_map(|u| u.iter().copied()));
    let oracle = m * u + mv;
    assert!((g.flat() - &oracle).amax() < 1e-10 * (1.0 + oracle.amax()));
}

#[test]
fn smooth_gradient_matches_finite_differences_with_quadratic_error_decay() {
    let mut r = rng(4);
    for _ in 0..5 {
        let game = random_smooth_game(&mut r, 5, 2, &[1, 1]);
        let acts: Vec<DVector<f64>> = (0..6).map(|_| rand_vec(&mut r, 2, 1.0)).collect();
        let (_, g) = pseudo_gradient_of_actions(&game, &acts).unwrap();
        let g = g.flat();
        let e1 = (fd_pseudo_gradient(&game, &acts, 1e-3) - &g).norm() / g.norm();
        let e2 = (fd_pseudo_gradient(&game, &acts, 5e-4) - &g).norm() / g.norm();
        assert!(e1 < 1e-6, "relative error {e1}");
        let ratio = e1 / e2;
        assert!((3.0..5.0).contains(&ratio), "decay ratio {ratio}");
    }
}

#[test]
fn fd_derivative_fallback_gives_accurate_gradient() {
    let mut r = rng(5);
    let spec = random_lq(&mut r, 4, 2, &[1, 1], 1.0);
    let (exact, opaque) = (spec.build(), spec.build_opaque());
    let acts: Vec<DVector<f64>> = (0..5).map(|_| rand_vec(&mut r, 2, 1.0)).collect();
    let a = pseudo_gradient_of_actions(&exact, &acts).unwrap().1.flat();
    let b = pseudo_gradient_of_actions(&opaque, &acts).unwrap().1.flat();
    assert!((a - &b).amax() < 1e-6 * (1.0 + b.amax()));
}

#[test]
fn costate_vanishes_past_the_horizon() {
    let mut r = rng(6);
    let game = random_smooth_game(&mut r, 3, 2, &[1, 1]);
    let tr = game.rollout(&game.zero_actions()).unwrap();
    let g = pseudo_gradient(&game, &tr).unwrap();
    for n in 0..2 {
        assert_eq!(g.omega[n][4].amax(), 0.0);
    }
    assert_eq!(g.player_major().len(), g.flat().len());
}

#[test]
fn infeasible_trajectory_is_rejected() {
    let mut r = rng(7);
    let game = random_smooth_game(&mut r, 3, 2, &[1, 1]);
    let mut tr = game.rollout(&game.zero_actions()).unwrap();
    tr.states[2][0] += 1.0;
    assert!(pseudo_gradient(&game, &tr).is_err());
}

#[test]
fn check_passes_at_unconstrained_convex_olne() {
    let mut r = rng(8);
    let spec = random_lq(&mut r, 3, 2, &[1, 1], 0.3);
    let game = spec.build();
    let u = spec.split(&kkt_olne(&spec));
    let tr = game.rollout(&u).unwrap();
    let v = playerwise_minimizer_check(&game, &tr, 1e-6).unwrap();
    assert!(v.iter().all(|v| matches!(v, PlayerVerdict::StationaryConvex { .. })), "{v:?}");
}

#[test]
fn check_flags_nonstationary_unconstrained_point() {
    let mut r = rng(9);
    let spec = random_lq(&mut r, 3, 2, &[1, 1], 0.3);
    let game = spec.build();
    let tr = game.rollout(&game.zero_actions()).unwrap();
    let v = playerwise_minimizer_check(&game, &tr, 1e-6).unwrap();
    assert!(v.iter().any(|v| !v.passes()));
}

#[test]
fn nonlinear_dynamics_without_jacobians_still_differentiate() {
    let game = GameBuilder::new(2, DVector::from_vec(vec![0.5]), vec![1])
        .dynamics_all(Arc::new(FnDynamics::new(|x, u| DVector::from_vec(vec![x[0].sin() + u[0] * x[0]]))))
        .running_cost(0, Arc::new(dyngame::game::primitives::FnCost::new(|x, u| x[0] * x[0] + u[0] * u[0])))
        .terminal_cost(0, Arc::new(dyngame::game::primitives::FnCost::new(|x, u| 3.0 * x[0] * x[0] + u[0] * u[0])))
        .build()
        .unwrap();
    let acts = vec![DVector::from_vec(vec![0.3]), DVector::from_vec(vec![-0.2]), DVector::from_vec(vec![0.1])];
    let g = pseudo_gradient_of_actions(&game, &acts).unwrap().1.flat();
    let fd = fd_pseudo_gradient(&game, &acts, 1e-4);
    assert!((g - fd).amax() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gradient_agrees_with_finite_differences(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let game = random_smooth_game(&mut r, 3, 2, &[1, 1]);
        let acts: Vec<DVector<f64>> = (0..4).map(|_| rand_vec(&mut r, 2, 1.0)).collect();
        let g = pseudo_gradient_of_actions(&game, &acts).unwrap().1.flat();
        let fd = fd_pseudo_gradient(&game, &acts, 1e-4);
        prop_assert!((&g - &fd).norm() <= 1e-6 * (1.0 + g.norm()));
    }

    #[test]
    fn rollout_reproduces_its_own_states(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let game = random_smooth_game(&mut r, 4, 2, &[1, 1]);
        let acts: Vec<DVector<f64>> = (0..5).map(|_| rand_vec(&mut r, 2, 1.0)).collect();
        let tr = game.rollout(&acts).unwrap();
        let again = game.rollout(&tr.actions).unwrap();
        prop_assert!(tr.distance(&again) <= 1e-12);
        prop_assert!(game.dynamics_residual(&tr) <= 1e-12);
    }
}
