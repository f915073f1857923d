//! Local linear/quadratic models of a game around a reference trajectory.

use nalgebra::{DMatrix, DVector};

use super::derivatives::{constraint_jacobians, cost_gradient, cost_hessian, dynamics_hessians, dynamics_jacobians};
use super::{GameDefinition, Trajectory};
use crate::error::Result;

/// Constraint linearisation `w dx + s du + p` at one stage (`p` is the value at the reference).
#[derive(Debug, Clone)]
pub struct LinearizedConstraint {
    pub w: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub p: DVector<f64>,
    pub n_eq: usize,
    /// Rows within tolerance of active (equalities always included), ascending.
    pub active: Vec<usize>,
}

impl LinearizedConstraint {
    pub fn active_rows(&self) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
        let a = &self.active;
        (self.w.select_rows(a), self.s.select_rows(a), self.p.select_rows(a))
    }
}

/// Second-order model of stage `k`.
///
/// `m[n]` is player `n`'s cost in `[1; dx; du]` coordinates: `[2c, g'; g, H]`.
/// For `k = T` the dynamics blocks are zero.
#[derive(Debug, Clone)]
pub struct StageQuadraticization {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// One Hessian of `f_k` per state component over `[x; u]`.
    pub g: Vec<DMatrix<f64>>,
    pub m: Vec<DMatrix<f64>>,
    pub constraint: Option<LinearizedConstraint>,
}

/// First-order model: dynamics Jacobians and per-player cost gradients.
#[derive(Debug, Clone)]
pub struct StageLinearization {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub gx: Vec<DVector<f64>>,
    pub gu: Vec<DVector<f64>>,
}

pub fn linearize_stage(game: &GameDefinition, traj: &Trajectory, k: usize) -> Result<StageLinearization> {
    game.check_stage(k)?;
    let (x, u) = (&traj.states[k], &traj.actions[k]);
    let (nx, nu) = (game.state_dim(), game.joint_action_dim());
    let (a, b) = if k < game.horizon() {
        dynamics_jacobians(game.dynamics(k), x, u)
    } else {
        (DMatrix::zeros(nx, nx), DMatrix::zeros(nx, nu))
    };
    let (gx, gu) = (0..game.num_players()).map(|n| cost_gradient(game.cost(n, k), x, u)).unzip();
    Ok(StageLinearization { a, b, gx, gu })
}

pub fn linearize_constraint(
    game: &GameDefinition,
    traj: &Trajectory,
    k: usize,
    active_tol: f64,
) -> Option<LinearizedConstraint> {
    let c = game.constraint(k)?;
    if c.is_empty() {
        return None;
    }
    let (x, u) = (&traj.states[k], &traj.actions[k]);
    let (w, s) = constraint_jacobians(c, x, u);
    let p = c.value(x, u);
    let n_eq = c.equality_rows();
    let active = (0..p.len()).filter(|&i| i < n_eq || p[i] >= -active_tol).collect();
    Some(LinearizedConstraint { w, s, p, n_eq, active })
}

pub fn quadraticize_stage(
    game: &GameDefinition,
    traj: &Trajectory,
    k: usize,
    active_tol: f64,
) -> Result<StageQuadraticization> {
    let lin = linearize_stage(game, traj, k)?;
    let (x, u) = (&traj.states[k], &traj.actions[k]);
    let (nx, nu) = (game.state_dim(), game.joint_action_dim());
    let g = if k < game.horizon() {
        dynamics_hessians(game.dynamics(k), x, u)
    } else {
        vec![DMatrix::zeros(nx + nu, nx + nu); nx]
    };
    let m = (0..game.num_players())
        .map(|n| {
            let c = game.cost(n, k);
            let h = cost_hessian(c, x, u);
            let mut m = DMatrix::zeros(1 + nx + nu, 1 + nx + nu);
            m[(0, 0)] = 2.0 * c.value(x, u);
            for i in 0..nx {
                m[(0, 1 + i)] = lin.gx[n][i];
                m[(1 + i, 0)] = lin.gx[n][i];
            }
            for i in 0..nu {
                m[(0, 1 + nx + i)] = lin.gu[n][i];
                m[(1 + nx + i, 0)] = lin.gu[n][i];
            }
            m.view_mut((1, 1), (nx + nu, nx + nu)).copy_from(&h);
            m
        })
        .collect();
    Ok(StageQuadraticization {
        a: lin.a,
        b: lin.b,
        g,
        m,
        constraint: linearize_constraint(game, traj, k, active_tol),
    })
}

pub fn quadraticize(game: &GameDefinition, traj: &Trajectory, active_tol: f64) -> Result<Vec<StageQuadraticization>> {
    game.check_trajectory(traj, 1e-6 * (1.0 + traj.states.iter().map(crate::linalg::inf_norm).fold(0.0, f64::max)))?;
    (0..=game.horizon()).map(|k| quadraticize_stage(game, traj, k, active_tol)).collect()
}

/// Active row indices per stage: equalities plus rows with `g_i >= -tol`.
pub fn active_set_partition(game: &GameDefinition, traj: &Trajectory, tol: f64) -> Vec<Vec<usize>> {
    (0..=game.horizon())
        .map(|k| {
            let Some(c) = game.constraint(k) else { return Vec::new() };
            let g = c.value(&traj.states[k], &traj.actions[k]);
            (0..g.len()).filter(|&i| i < c.equality_rows() || g[i] >= -tol).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::GameBuilder;
    use crate::game::StageCost;
    use crate::game::primitives::{FnCost, FnDynamics};
    use std::sync::Arc;

    #[test]
    fn quadratic_model_reproduces_second_order_taylor() {
        let d = Arc::new(FnDynamics::new(|x, u| DVector::from_vec(vec![x[0] + 0.1 * (x[0] * u[0]).sin()])));
        let c = Arc::new(FnCost::new(|x, u| x[0].powi(2) * u[1] + (u[0] - 1.0).powi(2)));
        let game = GameBuilder::new(1, DVector::from_vec(vec![0.5]), vec![1, 1])
            .dynamics_all(d)
            .running_cost(0, c.clone())
            .running_cost(1, c.clone())
            .terminal_cost(0, c.clone())
            .terminal_cost(1, c.clone())
            .build()
            .unwrap();
        let traj = game.rollout(&[DVector::from_vec(vec![0.2, 0.3]), DVector::from_vec(vec![0.0, 0.0])]).unwrap();
        let q = quadraticize_stage(&game, &traj, 0, 1e-8).unwrap();
        let dz = DVector::from_vec(vec![1.0, 1e-3, -2e-3, 1e-3]);
        let xp = DVector::from_vec(vec![0.5 + 1e-3]);
        let up = DVector::from_vec(vec![0.2 - 2e-3, 0.3 + 1e-3]);
        let model = 0.5 * dz.dot(&(&q.m[0] * &dz));
        assert!((model - c.value(&xp, &up)).abs() < 1e-8);
    }
}
