//! Newton's method for open-loop Nash equilibria of unconstrained games.
//!
//! The Newton system for `J(u) = 0` is eliminated stage by stage: each player's costate is
//! modelled as an affine function of the state deviation, `psi = omega + zeta + Z dx`, which
//! gives a backward recursion in `O(T)`. On linear-quadratic games one step is exact.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::game::derivatives::{cost_gradient, cost_hessian};
use crate::game::quadraticize::quadraticize_stage;
use crate::game::{GameDefinition, StageCost, Trajectory};
use crate::gradient::pseudo_gradient;
use crate::linalg::{inf_norm, solve};

#[derive(Debug, Clone, Copy)]
pub struct NewtonConfig {
    /// Stop when `|J(u)|_inf <= tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50 }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub trajectory: Trajectory,
    /// Number of Newton steps taken.
    pub iterations: usize,
    pub residual: f64,
}

/// One Newton step direction `(du_k = K_k dx_k + s_k)` at `traj`.
fn newton_direction(game: &GameDefinition, traj: &Trajectory) -> Result<Vec<(DMatrix<f64>, DVector<f64>)>> {
    let grad = pseudo_gradient(game, traj)?;
    let t = game.horizon();
    let np = game.num_players();
    let (nx, nu) = (game.state_dim(), game.joint_action_dim());
    let mut z = vec![DMatrix::<f64>::zeros(nx, nx); np];
    let mut zeta = vec![DVector::<f64>::zeros(nx); np];
    let mut laws = Vec::with_capacity(t + 1);
    for k in (0..=t).rev() {
        let q = quadraticize_stage(game, traj, k, 0.0)?;
        let mut f = DMatrix::zeros(nu, nu);
        let mut p = DMatrix::zeros(nu, nx);
        let mut h = DVector::zeros(nu);
        let mut cxx = Vec::with_capacity(np);
        let mut cxu = Vec::with_capacity(np);
        for n in 0..np {
            let omega = &grad.omega[n][k + 1];
            let mut d = DMatrix::zeros(nx + nu, nx + nu);
            for (l, gl) in q.g.iter().enumerate() {
                if omega[l] != 0.0 {
                    d += gl * omega[l];
                }
            }
            let m = &q.m[n];
            let za = &z[n] * &q.a;
            let zb = &z[n] * &q.b;
            let xx = m.view((1, 1), (nx, nx)) + d.view((0, 0), (nx, nx)) + q.a.tr_mul(&za);
            let xu = m.view((1, 1 + nx), (nx, nu)) + d.view((0, nx), (nx, nu)) + q.a.tr_mul(&zb);
            let ux = m.view((1 + nx, 1), (nu, nx)) + d.view((nx, 0), (nu, nx)) + q.b.tr_mul(&za);
            let uu = m.view((1 + nx, 1 + nx), (nu, nu)) + d.view((nx, nx), (nu, nu)) + q.b.tr_mul(&zb);
            let hu = m.view((1 + nx, 0), (nu, 1)).column(0) + q.b.tr_mul(&(omega + &zeta[n]));
            let (off, dn) = (game.action_offset(n), game.action_dims()[n]);
            f.rows_mut(off, dn).copy_from(&uu.rows(off, dn));
            p.rows_mut(off, dn).copy_from(&ux.rows(off, dn));
            h.rows_mut(off, dn).copy_from(&hu.rows(off, dn));
            cxx.push(xx);
            cxu.push(xu);
        }
        let mut rhs = DMatrix::zeros(nu, nx + 1);
        rhs.columns_mut(0, nx).copy_from(&(-&p));
        rhs.set_column(nx, &(-&h));
        let sol = solve(&f, &rhs).ok_or(Error::Singular { what: "Newton stage matrix F".into(), stage: k })?;
        let kk = sol.columns(0, nx).into_owned();
        let s = sol.column(nx).into_owned();
        for n in 0..np {
            z[n] = &cxx[n] + &cxu[n] * &kk;
            zeta[n] = &cxu[n] * &s + q.a.tr_mul(&zeta[n]);
        }
        laws.push((kk, s));
    }
    laws.reverse();
    Ok(laws)
}

fn apply_direction(
    game: &GameDefinition,
    traj: &Trajectory,
    laws: &[(DMatrix<f64>, DVector<f64>)],
    step: f64,
) -> Result<Trajectory> {
    let t = game.horizon();
    let mut states = vec![game.initial_state().clone()];
    let mut actions = Vec::with_capacity(t + 1);
    for k in 0..=t {
        let (kk, s) = &laws[k];
        let u = &traj.actions[k] + s * step + kk * (&states[k] - &traj.states[k]);
        if k < t {
            let x = game.dynamics(k).step(&states[k], &u);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("state at stage {}", k + 1)));
            }
            states.push(x);
        }
        actions.push(u);
    }
    Ok(Trajectory { states, actions })
}

/// Open-loop Nash equilibrium of the game with its constraints ignored.
pub fn solve_unconstrained_olne(game: &GameDefinition, u0: &[DVector<f64>], cfg: NewtonConfig) -> Result<NewtonResult> {
    let mut traj = game.rollout(u0)?;
    let mut res = inf_norm(&pseudo_gradient(game, &traj)?.flat());
    let mut iterations = 0;
    while res > cfg.tol {
        if iterations >= cfg.max_iter {
            return Err(Error::NotConverged { what: "Newton equilibrium solve".into(), iterations, residual: res });
        }
        let laws = newton_direction(game, &traj)?;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            if let Ok(cand) = apply_direction(game, &traj, &laws, step) {
                let r = inf_norm(&pseudo_gradient(game, &cand)?.flat());
                if r.is_finite() && (r < res || step == 1.0 && r <= cfg.tol) {
                    accepted = Some((cand, r));
                    break;
                }
            }
            step *= 0.5;
        }
        iterations += 1;
        let Some((cand, r)) = accepted else {
            return Err(Error::NotConverged { what: "Newton line search".into(), iterations, residual: res });
        };
        traj = cand;
        res = r;
    }
    Ok(NewtonResult { trajectory: traj, iterations, residual: res })
}

/// `c(x, u) + 0.5 wx |x - y|^2 + 0.5 wu |u - z|^2`.
pub struct RegularizedCost {
    pub inner: Arc<dyn StageCost>,
    pub y: Option<DVector<f64>>,
    pub z: DVector<f64>,
    pub wx: f64,
    pub wu: f64,
}

impl StageCost for RegularizedCost {
    fn value(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let rx = self.y.as_ref().map_or(0.0, |y| 0.5 * self.wx * (x - y).norm_squared());
        self.inner.value(x, u) + rx + 0.5 * self.wu * (u - &self.z).norm_squared()
    }
    fn gradient(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let (mut gx, gu) = cost_gradient(self.inner.as_ref(), x, u);
        if let Some(y) = &self.y {
            gx += (x - y) * self.wx;
        }
        Some((gx, gu + (u - &self.z) * self.wu))
    }
    fn hessian(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<DMatrix<f64>> {
        let mut h = cost_hessian(self.inner.as_ref(), x, u);
        let nx = x.len();
        for i in 0..nx + u.len() {
            h[(i, i)] += if i < nx { if self.y.is_some() { self.wx } else { 0.0 } } else { self.wu };
        }
        Some(h)
    }
}

/// Unconstrained game with every player's cost regularised towards `(y, z)` with weight `1/eta`.
/// With `y = None` only the actions are regularised.
pub fn regularized_game(game: &GameDefinition, y: Option<&[DVector<f64>]>, z: &[DVector<f64>], eta: f64) -> GameDefinition {
    game.map_costs(
        |_, k, c| {
            Arc::new(RegularizedCost { inner: c, y: y.map(|y| y[k].clone()), z: z[k].clone(), wx: 1.0 / eta, wu: 1.0 / eta })
        },
        false,
    )
}
