mod common;

use std::sync::Arc;

use common::*;
use dyngame::game::primitives::BoxConstraint;
use dyngame::projgrad::{ProjGradConfig, project_onto_feasible, projected_gradient_solve};
use dyngame::report::Termination;
use dyngame::splitting::resolvents::{DynamicsHandling, InnerConfig};
use dyngame::splitting::{DrConfig, Scheme, dr_solve, initial_iterate};
use dyngame::{GameBuilder, GameDefinition};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn flat(u: &[DVector<f64>]) -> DVector<f64> {
    DVector::from_iterator(u.len() * u[0].len(), u.iter().flat_map(|v| v.iter().copied()))
}

fn dr(scheme: Scheme, eta: f64, max_iter: usize) -> DrConfig {
    DrConfig { scheme, eta, max_iter, tol: 1e-10, run_check: false, ..DrConfig::default() }
}

#[test]
fn three_schemes_agree_with_kkt_oracle() {
    let spec = constrained_spec(21);
    let oracle = kkt_olne(&spec);
    let game = spec.build();
    let w0 = initial_iterate(&game, &game.zero_actions()).unwrap();
    for scheme in [Scheme::SingleOutG, Scheme::SingleOutD, Scheme::SingleOutJ] {
        let rep = dr_solve(&game, &w0, &dr(scheme, 0.5, 20_000)).unwrap();
        let err = (flat(&rep.solution.actions) - &oracle).amax();
        assert!(err < 1e-4, "{scheme:?}: error {err} after {} iterations", rep.iterations);
    }
}

#[test]
fn projected_gradient_reaches_box_constrained_olne() {
    let mut r = rng(22);
    let mut spec = random_lq(&mut r, 3, 2, &[1, 1], 0.3);
    let game = {
        let mut b = GameBuilder::new(spec.t, spec.x0.clone(), spec.dims.clone());
        for (k, (a, bm, c)) in spec.maps.iter().enumerate() {
            b = b.dynamics(k, Arc::new(dyngame::game::primitives::LinearDynamics::new(a.clone(), bm.clone(), c.clone())));
        }
        for n in 0..2 {
            for k in 0..=spec.t {
                b = b.cost(n, k, Arc::new(dyngame::game::primitives::QuadraticCost::new(spec.q[n][k].clone())));
            }
        }
        let bx = Arc::new(BoxConstraint { lower: DVector::from_element(2, -0.2), upper: DVector::from_element(2, 0.2) });
        b.constraint_all(bx).build().unwrap()
    };
    // The same box as affine rows for the oracle: u - 0.2 <= 0, -u - 0.2 <= 0.
    let s = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]);
    for k in 0..=spec.t {
        spec.cons[k] = Some(Rows { w: DMatrix::zeros(4, 2), s: s.clone(), p: DVector::from_element(4, -0.2), n_eq: 0 });
    }
    let oracle = kkt_olne(&spec);
    let cfg = ProjGradConfig { rho: 0.1, max_iter: 20_000, tol: 1e-13, ..ProjGradConfig::default() };
    let rep = projected_gradient_solve(&game, &game.zero_actions(), &cfg).unwrap();
    assert_eq!(rep.termination, Termination::Tolerance);
    assert!((flat(&rep.solution.actions) - oracle).amax() < 1e-9);
    assert!(rep.verdicts.iter().all(|v| v.passes()), "{:?}", rep.verdicts);
    assert!(rep.solution.actions.iter().all(|u| u.amax() <= 0.2 + 1e-15));
}

#[test]
fn projected_gradient_with_state_constraint_uses_inner_projection() {
    let spec = constrained_spec(23);
    let oracle = kkt_olne(&spec);
    let game = spec.build();
    let cfg = ProjGradConfig { rho: 0.05, max_iter: 5000, tol: 1e-11, dynamics: DynamicsHandling::Exact, inner: InnerConfig { tol: 1e-12, max_iter: 50_000 }, ..ProjGradConfig::default() };
    let rep = projected_gradient_solve(&game, &game.zero_actions(), &cfg).unwrap();
    assert!((flat(&rep.solution.actions) - oracle).amax() < 1e-6, "{:?}", rep.termination);
    assert!(rep.constraint_violation < 1e-8);
}

#[test]
fn projected_gradient_divergence_is_reported() {
    let mut r = rng(24);
    let spec = random_lq(&mut r, 3, 2, &[1, 1], 0.3);
    let game = spec.build();
    let cfg = ProjGradConfig { rho: 50.0, max_iter: 500, run_check: false, ..ProjGradConfig::default() };
    let rep = projected_gradient_solve(&game, &game.zero_actions(), &cfg).unwrap();
    assert_eq!(rep.termination, Termination::Divergence);
}

#[test]
fn invalid_solver_configs_are_rejected() {
    let game = random_lq(&mut rng(25), 2, 1, &[1], 1.0).build();
    let bad = ProjGradConfig { rho: 0.0, ..ProjGradConfig::default() };
    assert!(projected_gradient_solve(&game, &game.zero_actions(), &bad).is_err());
    let w0 = initial_iterate(&game, &game.zero_actions()).unwrap();
    assert!(dr_solve(&game, &w0, &DrConfig { alpha: 1.0, ..DrConfig::default() }).is_err());
    assert!(dr_solve(&game, &w0, &DrConfig { eta: -1.0, ..DrConfig::default() }).is_err());
}

#[test]
fn unconstrained_dr_fixed_point_is_the_olne() {
    let mut r = rng(26);
    let spec = random_lq(&mut r, 3, 2, &[1, 1], 0.3);
    let oracle = kkt_olne(&spec);
    let game = spec.build();
    let w0 = initial_iterate(&game, &spec.split(&oracle)).unwrap();
    for scheme in [Scheme::SingleOutG, Scheme::SingleOutD, Scheme::SingleOutJ] {
        let rep = dr_solve(&game, &w0, &dr(scheme, 0.3, 3)).unwrap();
        assert!((flat(&rep.solution.actions) - &oracle).amax() < 1e-8, "{scheme:?}");
    }
}

fn box_game(lo: f64, hi: f64) -> GameDefinition {
    let spec = random_lq(&mut rng(27), 3, 2, &[1, 1], 0.3);
    let mut b = GameBuilder::new(3, spec.x0.clone(), vec![1, 1]);
    for (k, (a, bm, c)) in spec.maps.iter().enumerate() {
        b = b.dynamics(k, Arc::new(dyngame::game::primitives::LinearDynamics::new(a.clone(), bm.clone(), c.clone())));
    }
    for n in 0..2 {
        for k in 0..=3 {
            b = b.cost(n, k, Arc::new(dyngame::game::primitives::QuadraticCost::new(spec.q[n][k].clone())));
        }
    }
    b.constraint_all(Arc::new(BoxConstraint { lower: DVector::from_element(2, lo), upper: DVector::from_element(2, hi) })).build().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projection_is_idempotent(seed in 0u64..10_000) {
        let game = box_game(-0.3, 0.5);
        let mut r = rng(seed);
        let u: Vec<DVector<f64>> = (0..4).map(|_| rand_vec(&mut r, 2, 2.0)).collect();
        let inner = InnerConfig::default();
        let once = project_onto_feasible(&game, &u, DynamicsHandling::Exact, inner).unwrap();
        let twice = project_onto_feasible(&game, &once, DynamicsHandling::Exact, inner).unwrap();
        prop_assert!((flat(&once) - flat(&twice)).amax() <= 2.0 * inner.tol);
    }

    #[test]
    fn state_constrained_projection_is_idempotent_and_feasible(seed in 0u64..10_000) {
        let game = constrained_spec(23).build();
        let mut r = rng(seed);
        let u: Vec<DVector<f64>> = (0..5).map(|_| rand_vec(&mut r, 2, 2.0)).collect();
        let inner = InnerConfig { tol: 1e-11, max_iter: 50_000 };
        let once = project_onto_feasible(&game, &u, DynamicsHandling::Exact, inner).unwrap();
        let twice = project_onto_feasible(&game, &once, DynamicsHandling::Exact, inner).unwrap();
        prop_assert!(game.max_violation(&game.rollout(&once).unwrap()) <= 1e-8);
        prop_assert!((flat(&once) - flat(&twice)).amax() <= 1e-8);
    }

    #[test]
    fn projected_iterates_stay_in_the_box(seed in 0u64..10_000) {
        let game = box_game(-0.1, 0.1);
        let mut r = rng(seed);
        let u0: Vec<DVector<f64>> = (0..4).map(|_| rand_vec(&mut r, 2, 0.1)).collect();
        let cfg = ProjGradConfig { rho: 0.05, max_iter: 30, run_check: false, ..ProjGradConfig::default() };
        let rep = projected_gradient_solve(&game, &u0, &cfg).unwrap();
        for it in &rep.iterates[1..] {
            prop_assert!(it.amax() <= 0.1 + 1e-15);
        }
    }
}
