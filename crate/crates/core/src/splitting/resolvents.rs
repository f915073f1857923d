//! Resolvent subproblems for the splitting schemes, in `[x; u]` trajectory form.
//!
//! Operators: `J_xu = [0; J(u)]` (pseudo-gradient on the rollout of `u`), and the normal cones
//! of the dynamics manifold `D` and of the stage-constraint set `G`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::feedback::openloop::{NewtonConfig, regularized_game, solve_unconstrained_olne};
use crate::game::derivatives::dynamics_jacobians;
use crate::game::primitives::project_affine_rows;
use crate::game::{AffineMap, GameDefinition, Trajectory};
use crate::gradient::pseudo_gradient_of_actions;
use crate::linalg::inf_norm;
use crate::lq::track;

#[derive(Debug, Clone, Copy)]
pub struct InnerConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 20_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DynamicsHandling {
    /// Affine dynamics only.
    #[default]
    Exact,
    /// Successive linearisation about the rollout of the current actions.
    Linearized,
}

/// `[0; J(u)]` stacked as `[x_0..x_T; u_0..u_T]`.
pub fn extended_gradient(game: &GameDefinition, w: &Trajectory) -> Result<DVector<f64>> {
    let (_, g) = pseudo_gradient_of_actions(game, &w.actions)?;
    let nx = game.state_dim() * (game.horizon() + 1);
    let gu = g.flat();
    let mut out = DVector::zeros(nx + gu.len());
    out.rows_mut(nx, gu.len()).copy_from(&gu);
    Ok(out)
}

/// Stagewise Euclidean projection onto `{g_k <= 0}`.
pub fn project_stage_constraints(game: &GameDefinition, v: &Trajectory) -> Result<Trajectory> {
    let mut out = v.clone();
    for k in 0..=game.horizon() {
        let Some(c) = game.constraint(k) else { continue };
        if c.is_empty() {
            continue;
        }
        let (x, u) = (&v.states[k], &v.actions[k]);
        let (px, pu) = match c.project(x, u) {
            Some(p) => p,
            None => {
                let rows = game.affine_constraint(k).ok_or_else(|| Error::Unsupported(format!("no projector for the constraint at stage {k}")))?;
                project_affine_rows(&rows, x, u).ok_or(Error::Infeasible { max_violation: game.stage_violation(k, x, u) })?
            }
        };
        out.states[k] = px;
        out.actions[k] = pu;
    }
    Ok(out)
}

fn linearized_maps(game: &GameDefinition, traj: &Trajectory) -> Vec<AffineMap> {
    (0..game.horizon())
        .map(|k| {
            let (x, u) = (&traj.states[k], &traj.actions[k]);
            let (a, b) = dynamics_jacobians(game.dynamics(k), x, u);
            let c = game.dynamics(k).step(x, u) - &a * x - &b * u;
            AffineMap { a, b, c }
        })
        .collect()
}

/// Minimises `0.5 wx |x - y|^2 + 0.5 wu |u - z|^2` over dynamically feasible trajectories.
fn weighted_dynamics_projection(
    game: &GameDefinition,
    y: &[DVector<f64>],
    z: &[DVector<f64>],
    wx: f64,
    wu: f64,
    handling: DynamicsHandling,
) -> Result<Trajectory> {
    if let Some(maps) = game.affine_dynamics() {
        return track(&maps, game.initial_state(), y, z, wx, wu);
    }
    if handling == DynamicsHandling::Exact {
        return Err(Error::Unsupported("nonlinear dynamics need the linearized projection mode".into()));
    }
    let mut traj = game.rollout(z)?;
    for _ in 0..50 {
        let maps = linearized_maps(game, &traj);
        let sol = track(&maps, game.initial_state(), y, z, wx, wu)?;
        let next = game.rollout(&sol.actions)?;
        let change = next.action_distance(&traj);
        traj = next;
        if change <= 1e-12 * (1.0 + inf_norm(&traj.flat_actions())) {
            break;
        }
    }
    Ok(traj)
}

/// Euclidean projection of `(y, z)` onto the dynamics manifold with the initial state fixed.
pub fn project_dynamics(game: &GameDefinition, v: &Trajectory, handling: DynamicsHandling) -> Result<Trajectory> {
    weighted_dynamics_projection(game, &v.states, &v.actions, 1.0, 1.0, handling)
}

/// Weighted projection onto `D` intersected with `G`, by an inner splitting between the
/// dynamics (Riccati sweep with the weights) and the stagewise constraint projection.
pub fn weighted_feasible_projection(
    game: &GameDefinition,
    v: &Trajectory,
    wx: f64,
    wu: f64,
    handling: DynamicsHandling,
    cfg: InnerConfig,
) -> Result<Trajectory> {
    if !game.has_constraints() {
        return weighted_dynamics_projection(game, &v.states, &v.actions, wx, wu, handling);
    }
    let mut s = v.clone();
    let mut last = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        let ys: Vec<DVector<f64>> = v.states.iter().zip(&s.states).map(|(a, b)| (a * wx + b) / (wx + 1.0)).collect();
        let zs: Vec<DVector<f64>> = v.actions.iter().zip(&s.actions).map(|(a, b)| (a * wu + b) / (wu + 1.0)).collect();
        let p = weighted_dynamics_projection(game, &ys, &zs, wx + 1.0, wu + 1.0, handling)?;
        let q = project_stage_constraints(game, &p.combine(2.0, &s, -1.0))?;
        last = q.distance(&p);
        s = s.combine(1.0, &q.combine(1.0, &p, -1.0), 1.0);
        if last <= cfg.tol {
            return Ok(p);
        }
    }
    let ys: Vec<DVector<f64>> = v.states.iter().zip(&s.states).map(|(a, b)| (a * wx + b) / (wx + 1.0)).collect();
    let zs: Vec<DVector<f64>> = v.actions.iter().zip(&s.actions).map(|(a, b)| (a * wu + b) / (wu + 1.0)).collect();
    let p = weighted_dynamics_projection(game, &ys, &zs, wx + 1.0, wu + 1.0, handling)?;
    let violation = game.max_violation(&p);
    if violation > 10.0 * cfg.tol {
        Err(Error::Infeasible { max_violation: violation })
    } else {
        Err(Error::NotConverged { what: "feasible-set projection".into(), iterations: cfg.max_iter, residual: last })
    }
}

/// Projection of `(y, z)` onto `D` intersected with `G` with equal weights on states and actions.
pub fn constrained_oc_projection(game: &GameDefinition, v: &Trajectory, handling: DynamicsHandling, cfg: InnerConfig) -> Result<Trajectory> {
    weighted_feasible_projection(game, v, 1.0, 1.0, handling, cfg)
}

/// Resolvent of `eta J_xu + N_D`: the unconstrained game with costs
/// `c + |x - y|^2 / 2 eta + |u - z|^2 / 2 eta`, states eliminated by rollout.
pub fn resolvent_reg_game(game: &GameDefinition, v: &Trajectory, eta: f64, newton: NewtonConfig) -> Result<Trajectory> {
    if eta <= 0.0 {
        return Err(Error::Invalid("eta must be positive".into()));
    }
    let reg = regularized_game(game, Some(&v.states), &v.actions, eta);
    Ok(solve_unconstrained_olne(&reg, &v.actions, newton)?.trajectory)
}

/// Resolvent of `eta J_xu + N_G`: the fixed point `w = P_G(v - eta [0; J(u_w)])`, found by a
/// damped projected iteration.
pub fn resolvent_reg_static_games(game: &GameDefinition, v: &Trajectory, eta: f64, cfg: InnerConfig) -> Result<Trajectory> {
    if eta <= 0.0 {
        return Err(Error::Invalid("eta must be positive".into()));
    }
    let mut w = project_stage_constraints(game, v)?;
    let mut tau = 1.0;
    let mut prev = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        let (_, g) = pseudo_gradient_of_actions(game, &w.actions)?;
        let gu = crate::linalg::split_vector(&g.flat(), &vec![game.joint_action_dim(); game.horizon() + 1]);
        let target = Trajectory {
            states: w.states.iter().zip(&v.states).map(|(wx, vx)| wx - (wx - vx) * tau).collect(),
            actions: w.actions.iter().zip(&v.actions).zip(&gu).map(|((wu, vu), gk)| wu - (wu - vu + gk * eta) * tau).collect(),
        };
        let next = project_stage_constraints(game, &target)?;
        let change = next.distance(&w);
        if change > prev && tau > 1e-6 {
            tau *= 0.5;
        }
        prev = change;
        w = next;
        if change <= cfg.tol * tau.max(1e-3) {
            return Ok(w);
        }
    }
    Err(Error::NotConverged { what: "regularized constrained resolvent".into(), iterations: cfg.max_iter, residual: prev })
}

/// Resolvent of `eta J_xu` alone: states pass through, actions solve `u + eta J(u) = z`.
pub fn resolvent_static_games_uncon(game: &GameDefinition, v: &Trajectory, eta: f64, newton: NewtonConfig) -> Result<Trajectory> {
    if eta <= 0.0 {
        return Err(Error::Invalid("eta must be positive".into()));
    }
    let reg = regularized_game(game, None, &v.actions, eta);
    let sol = solve_unconstrained_olne(&reg, &v.actions, newton)?;
    Ok(Trajectory { states: v.states.clone(), actions: sol.trajectory.actions })
}
