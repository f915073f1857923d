//! Stacked pseudo-gradient `J(u)` by a backward costate pass, and the playerwise minimizer check.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::Result;
use crate::game::quadraticize::{active_set_partition, linearize_stage};
use crate::game::{GameDefinition, Trajectory};
use crate::linalg::{inf_norm, null_space, vstack};

/// Pseudo-gradient at a trajectory.
#[derive(Debug, Clone)]
pub struct PseudoGradient {
    /// Stage `k`, joint layout: player `n`'s own gradient `dJ_n/du_{n,k}` in its action slot.
    pub stages: Vec<DVector<f64>>,
    /// `omega[n][k]` for `k = 0..=T+1`, with `omega[n][T+1] = 0`.
    pub omega: Vec<Vec<DVector<f64>>>,
    action_dims: Vec<usize>,
}

impl PseudoGradient {
    /// Time-major stacking matching the joint action sequence layout.
    pub fn flat(&self) -> DVector<f64> {
        crate::linalg::stack_vectors(&self.stages)
    }

    /// Player-major stacking: `[dJ_1/du_{1,:}; dJ_2/du_{2,:}; ...]`.
    pub fn player_major(&self) -> DVector<f64> {
        let parts: Vec<DVector<f64>> = (0..self.action_dims.len()).map(|n| self.player_block(n)).collect();
        crate::linalg::stack_vectors(&parts)
    }

    /// `dJ_n/du_{n,:}` stacked over stages.
    pub fn player_block(&self, n: usize) -> DVector<f64> {
        let off: usize = self.action_dims[..n].iter().sum();
        let d = self.action_dims[n];
        let parts: Vec<DVector<f64>> = self.stages.iter().map(|g| g.rows(off, d).into_owned()).collect();
        crate::linalg::stack_vectors(&parts)
    }
}

fn feasibility_tol(traj: &Trajectory) -> f64 {
    1e-8 * (1.0 + traj.states.iter().map(inf_norm).fold(0.0, f64::max))
}

/// Backward pass `omega_k = dc/dx + A_k' omega_{k+1}`, `dJ_n/du_k = dc/du + B_k' omega_{k+1}`.
pub fn pseudo_gradient(game: &GameDefinition, traj: &Trajectory) -> Result<PseudoGradient> {
    game.check_trajectory(traj, feasibility_tol(traj))?;
    let t = game.horizon();
    let np = game.num_players();
    let nx = game.state_dim();
    let mut omega = vec![vec![DVector::zeros(nx); t + 2]; np];
    let mut stages = vec![DVector::zeros(game.joint_action_dim()); t + 1];
    for k in (0..=t).rev() {
        let lin = linearize_stage(game, traj, k)?;
        for n in 0..np {
            let next = &omega[n][k + 1];
            let full_u = &lin.gu[n] + lin.b.tr_mul(next);
            let (off, d) = (game.action_offset(n), game.action_dims()[n]);
            stages[k].rows_mut(off, d).copy_from(&full_u.rows(off, d));
            omega[n][k] = &lin.gx[n] + lin.a.tr_mul(next);
        }
    }
    Ok(PseudoGradient { stages, omega, action_dims: game.action_dims().to_vec() })
}

/// Evaluate the pseudo-gradient on the rollout of a joint action sequence.
pub fn pseudo_gradient_of_actions(game: &GameDefinition, actions: &[DVector<f64>]) -> Result<(Trajectory, PseudoGradient)> {
    let traj = game.rollout(actions)?;
    let g = pseudo_gradient(game, &traj)?;
    Ok((traj, g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IndeterminateReason {
    /// The own gradient is nonzero but no active constraint involves this player.
    NonzeroGradientUnconstrained,
    /// Stationary, but the reduced Hessian has a negative eigenvalue.
    NegativeCurvature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum PlayerVerdict {
    /// Nonzero own gradient held in place by active constraints.
    StrictDescentBlocked { gradient_norm: f64 },
    /// Zero own gradient and positive semidefinite reduced Hessian.
    StationaryConvex { min_eigenvalue: f64 },
    Indeterminate { reason: IndeterminateReason, gradient_norm: f64, min_eigenvalue: Option<f64> },
}

impl PlayerVerdict {
    pub fn passes(&self) -> bool {
        !matches!(self, PlayerVerdict::Indeterminate { .. })
    }
}

/// Sensitivity of all active constraint rows to player `n`'s stacked actions (states rolled out).
fn active_constraint_jacobian(game: &GameDefinition, traj: &Trajectory, n: usize, active: &[Vec<usize>]) -> Result<DMatrix<f64>> {
    let t = game.horizon();
    let nx = game.state_dim();
    let d = game.action_dims()[n];
    let off = game.action_offset(n);
    let cols = d * (t + 1);
    // dx_k/du_{n,:}, built forward.
    let mut dx = DMatrix::zeros(nx, cols);
    let mut blocks = Vec::new();
    for k in 0..=t {
        let lin = linearize_stage(game, traj, k)?;
        if !active[k].is_empty() {
            let c = game.constraint(k).expect("active rows imply a constraint");
            let (w, s) = crate::game::derivatives::constraint_jacobians(c, &traj.states[k], &traj.actions[k]);
            let (w, s) = (w.select_rows(&active[k]), s.select_rows(&active[k]));
            let mut j = &w * &dx;
            let su = s.columns(off, d).into_owned();
            let mut cols_k = j.columns_mut(k * d, d);
            cols_k += su;
            blocks.push(j);
        }
        if k < t {
            let mut next = &lin.a * &dx;
            let bn = lin.b.columns(off, d).into_owned();
            let mut cols_k = next.columns_mut(k * d, d);
            cols_k += bn;
            dx = next;
        }
    }
    let refs: Vec<&DMatrix<f64>> = blocks.iter().collect();
    Ok(if refs.is_empty() { DMatrix::zeros(0, cols) } else { vstack(&refs) })
}

/// Finite-difference Hessian of `J_n` with respect to player `n`'s own stacked actions.
fn own_hessian(game: &GameDefinition, traj: &Trajectory, n: usize) -> Result<DMatrix<f64>> {
    let t = game.horizon();
    let d = game.action_dims()[n];
    let off = game.action_offset(n);
    let dim = d * (t + 1);
    let mut h = DMatrix::zeros(dim, dim);
    let mut actions = traj.actions.clone();
    for j in 0..dim {
        let (k, i) = (j / d, off + j % d);
        let v = actions[k][i];
        let step = f64::EPSILON.cbrt() * (1.0 + v.abs());
        actions[k][i] = v + step;
        let gp = pseudo_gradient_of_actions(game, &actions)?.1.player_block(n);
        actions[k][i] = v - step;
        let gm = pseudo_gradient_of_actions(game, &actions)?.1.player_block(n);
        actions[k][i] = v;
        h.set_column(j, &((gp - gm) / (2.0 * step)));
    }
    Ok(crate::linalg::symmetrize(&h))
}

/// Per-player local-minimizer verdicts at a candidate VI solution.
///
/// Stationarity uses `|grad|_inf <= 1e-6 (1 + |u|_inf)`. The curvature test projects the
/// player's own Hessian onto the null space of the active-constraint Jacobian.
pub fn playerwise_minimizer_check(game: &GameDefinition, traj: &Trajectory, active_tol: f64) -> Result<Vec<PlayerVerdict>> {
    let grad = pseudo_gradient(game, traj)?;
    let active = active_set_partition(game, traj, active_tol);
    let u_norm = traj.actions.iter().map(inf_norm).fold(0.0, f64::max);
    let tol = 1e-6 * (1.0 + u_norm);
    let mut out = Vec::with_capacity(game.num_players());
    for n in 0..game.num_players() {
        let g = grad.player_block(n);
        let gnorm = inf_norm(&g);
        let jac = active_constraint_jacobian(game, traj, n, &active)?;
        let touches = jac.iter().any(|v| v.abs() > 1e-12);
        if gnorm > tol {
            out.push(if touches {
                PlayerVerdict::StrictDescentBlocked { gradient_norm: gnorm }
            } else {
                PlayerVerdict::Indeterminate {
                    reason: IndeterminateReason::NonzeroGradientUnconstrained,
                    gradient_norm: gnorm,
                    min_eigenvalue: None,
                }
            });
            continue;
        }
        let h = own_hessian(game, traj, n)?;
        let z = null_space(&jac, 1e-9);
        let min_eig = if z.ncols() == 0 {
            0.0
        } else {
            let reduced = z.transpose() * &h * &z;
            SymmetricEigen::new(crate::linalg::symmetrize(&reduced)).eigenvalues.min()
        };
        let scale = 1e-6 * (1.0 + h.abs().max());
        out.push(if min_eig >= -scale {
            PlayerVerdict::StationaryConvex { min_eigenvalue: min_eig }
        } else {
            PlayerVerdict::Indeterminate {
                reason: IndeterminateReason::NegativeCurvature,
                gradient_norm: gnorm,
                min_eigenvalue: Some(min_eig),
            }
        });
    }
    Ok(out)
}
