//! Stagewise Newton feedback policies around an open-loop equilibrium.
//!
//! The backward pass solves, at every stage, the equality-constrained stage game formed by the
//! local quadratic model plus the propagated value matrices, and returns affine gains.
//! Second-order value blocks follow the feedback recursion `Lambda = C' Gamma C`. First-order
//! terms are carried by the open-loop costates `omega`, augmented with the active-constraint
//! multipliers, so that an open-loop equilibrium is a fixed point (`s_k = 0`).

pub mod gap;
pub mod openloop;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::game::quadraticize::{StageQuadraticization, quadraticize};
use crate::game::{GameDefinition, Trajectory};
use crate::parametric::{AffineLaw, SingularHandling, solve_eq_constrained_stage_game};

#[derive(Debug, Clone)]
pub struct FeedbackOptions {
    pub active_tol: f64,
    /// Overrides the tolerance-based active sets when given (one list per stage).
    pub active: Option<Vec<Vec<usize>>>,
    pub singular: SingularHandling,
}

impl Default for FeedbackOptions {
    fn default() -> Self {
        Self { active_tol: 1e-6, active: None, singular: SingularHandling::Reject }
    }
}

/// Local feedback law `u_k = ubar_k + K_k (x_k - xbar_k)` with the backward-pass data.
///
/// `offsets` holds the Newton correction `s_k`; it vanishes when the reference is an OLNE and is
/// not applied by [`FeedbackPolicy::action`].
#[derive(Debug, Clone)]
pub struct FeedbackPolicy {
    pub reference: Trajectory,
    pub gains: Vec<DMatrix<f64>>,
    pub offsets: Vec<DVector<f64>>,
    pub laws: Vec<AffineLaw>,
    pub active: Vec<Vec<usize>>,
    /// `lambda[n][k]`, `(1 + nx)`-square, for `k = 0..=T+1`.
    pub lambda: Vec<Vec<DMatrix<f64>>>,
    /// `gamma[n][k]`, `(1 + nx + nu)`-square.
    pub gamma: Vec<Vec<DMatrix<f64>>>,
    /// `omega[n][k]` for `k = 0..=T+1`.
    pub omega: Vec<Vec<DVector<f64>>>,
    pub d: Vec<Vec<DMatrix<f64>>>,
    pub f: Vec<DMatrix<f64>>,
    pub p: Vec<DMatrix<f64>>,
    pub h: Vec<DVector<f64>>,
}

impl FeedbackPolicy {
    pub fn horizon(&self) -> usize {
        self.gains.len() - 1
    }

    pub fn action(&self, k: usize, x: &DVector<f64>) -> DVector<f64> {
        &self.reference.actions[k] + &self.gains[k] * (x - &self.reference.states[k])
    }

    /// Action of the full Newton law, `action(k, x) + s_k`.
    pub fn newton_action(&self, k: usize, x: &DVector<f64>) -> DVector<f64> {
        self.action(k, x) + &self.offsets[k]
    }

    /// Largest `|s_k|_inf`.
    pub fn max_offset(&self) -> f64 {
        self.offsets.iter().map(crate::linalg::inf_norm).fold(0.0, f64::max)
    }
}

/// `D = sum_l omega^l G^l` over `[x; u]`.
fn costate_curvature(q: &StageQuadraticization, omega: &DVector<f64>, n: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n, n);
    for (l, gl) in q.g.iter().enumerate() {
        if omega[l] != 0.0 {
            d += gl * omega[l];
        }
    }
    d
}

/// One backward pass of the stagewise Newton recursion at `traj`.
pub fn stagewise_newton_backward(game: &GameDefinition, traj: &Trajectory, opts: &FeedbackOptions) -> Result<FeedbackPolicy> {
    let quads = quadraticize(game, traj, opts.active_tol)?;
    let active: Vec<Vec<usize>> = match &opts.active {
        Some(a) => {
            crate::error::check_dim("active-set stages", game.horizon() + 1, a.len())?;
            a.clone()
        }
        None => quads.iter().map(|q| q.constraint.as_ref().map_or_else(Vec::new, |c| c.active.clone())).collect(),
    };
    backward_from_quadraticization(game, traj, &quads, &active, opts.singular)
}

pub fn backward_from_quadraticization(
    game: &GameDefinition,
    traj: &Trajectory,
    quads: &[StageQuadraticization],
    active: &[Vec<usize>],
    singular: SingularHandling,
) -> Result<FeedbackPolicy> {
    let t = game.horizon();
    let np = game.num_players();
    let (nx, nu) = (game.state_dim(), game.joint_action_dim());
    let nz = 1 + nx + nu;
    let mut lambda = vec![vec![DMatrix::zeros(1 + nx, 1 + nx); t + 2]; np];
    let mut omega = vec![vec![DVector::zeros(nx); t + 2]; np];
    let mut gamma = vec![vec![DMatrix::zeros(nz, nz); t + 1]; np];
    let mut dmat = vec![vec![DMatrix::zeros(nx + nu, nx + nu); t + 1]; np];
    let mut gains = vec![DMatrix::zeros(nu, nx); t + 1];
    let mut offsets = vec![DVector::zeros(nu); t + 1];
    let mut laws = Vec::with_capacity(t + 1);
    let (mut fs, mut ps, mut hs) = (vec![DMatrix::zeros(0, 0); t + 1], vec![DMatrix::zeros(0, 0); t + 1], vec![DVector::zeros(0); t + 1]);
    for k in (0..=t).rev() {
        let q = &quads[k];
        // E maps [1; dx; du] to [1; dx_{k+1}].
        let mut e = DMatrix::zeros(1 + nx, nz);
        e[(0, 0)] = 1.0;
        e.view_mut((1, 1), (nx, nx)).copy_from(&q.a);
        e.view_mut((1, 1 + nx), (nx, nu)).copy_from(&q.b);
        let (mut f, mut p, mut h) = (DMatrix::zeros(nu, nu), DMatrix::zeros(nu, nx), DVector::zeros(nu));
        for n in 0..np {
            let mut next = lambda[n][k + 1].clone();
            for i in 0..nx {
                next[(0, 1 + i)] = omega[n][k + 1][i];
                next[(1 + i, 0)] = omega[n][k + 1][i];
            }
            let d = costate_curvature(q, &omega[n][k + 1], nx + nu);
            let mut g = &q.m[n] + e.tr_mul(&(&next * &e));
            let mut lower = g.view_mut((1, 1), (nx + nu, nx + nu));
            lower += &d;
            let g = crate::linalg::symmetrize(&g);
            let (off, dn) = (game.action_offset(n), game.action_dims()[n]);
            let r = 1 + nx + off;
            f.rows_mut(off, dn).copy_from(&g.view((r, 1 + nx), (dn, nu)));
            p.rows_mut(off, dn).copy_from(&g.view((r, 1), (dn, nx)));
            h.rows_mut(off, dn).copy_from(&g.view((r, 0), (dn, 1)));
            gamma[n][k] = g;
            dmat[n][k] = d;
        }
        let (w, s, pa) = match &q.constraint {
            Some(c) => {
                let rows = &active[k];
                (c.w.select_rows(rows), c.s.select_rows(rows), c.p.select_rows(rows))
            }
            None => (DMatrix::zeros(0, nx), DMatrix::zeros(0, nu), DVector::zeros(0)),
        };
        let law = solve_eq_constrained_stage_game(&f, &p, &h, &w, &s, &pa, singular).map_err(|e| match e {
            Error::Singular { what, .. } => Error::Singular { what, stage: k },
            Error::RankDeficient { .. } => Error::RankDeficient { stage: k },
            other => other,
        })?;
        let mut c = DMatrix::zeros(nz, 1 + nx);
        c[(0, 0)] = 1.0;
        c.view_mut((1, 1), (nx, nx)).fill_with_identity();
        c.view_mut((1 + nx, 0), (nu, 1)).copy_from(&law.s);
        c.view_mut((1 + nx, 1), (nu, nx)).copy_from(&law.k);
        for n in 0..np {
            let g = &gamma[n][k];
            lambda[n][k] = crate::linalg::symmetrize(&c.tr_mul(&(g * &c)));
            let mut om = g.view((1, 0), (nx, 1)).column(0).into_owned();
            if w.nrows() > 0 {
                om += w.tr_mul(&law.lambda_offset);
            }
            omega[n][k] = om;
        }
        gains[k] = law.k.clone();
        offsets[k] = law.s.clone();
        fs[k] = f;
        ps[k] = p;
        hs[k] = h;
        laws.push(law);
    }
    laws.reverse();
    Ok(FeedbackPolicy {
        reference: traj.clone(),
        gains,
        offsets,
        laws,
        active: active.to_vec(),
        lambda,
        gamma,
        omega,
        d: dmat,
        f: fs,
        p: ps,
        h: hs,
    })
}

#[derive(Debug, Clone)]
pub struct FeedbackRollout {
    pub trajectory: Trajectory,
    /// Largest constraint violation per stage (0 when satisfied).
    pub violations: Vec<f64>,
}

impl FeedbackRollout {
    pub fn violated_stages(&self, tol: f64) -> usize {
        self.violations.iter().filter(|v| **v > tol).count()
    }
}

/// Simulates the true dynamics from `x_t` at stage `t` under the policy; `noise[k]` is added to
/// `x_{k+1}` when given.
pub fn feedback_rollout(
    game: &GameDefinition,
    policy: &FeedbackPolicy,
    x_t: &DVector<f64>,
    t: usize,
    noise: Option<&[DVector<f64>]>,
) -> Result<FeedbackRollout> {
    game.check_stage(t)?;
    let horizon = game.horizon();
    let mut states = vec![x_t.clone()];
    let mut actions = Vec::with_capacity(horizon + 1 - t);
    let mut violations = Vec::with_capacity(horizon + 1 - t);
    for k in t..=horizon {
        let x = states.last().unwrap().clone();
        let u = policy.action(k, &x);
        violations.push(game.stage_violation(k, &x, &u));
        if k < horizon {
            let mut next = game.dynamics(k).step(&x, &u);
            if let Some(w) = noise {
                next += &w[k];
            }
            states.push(next);
        }
        actions.push(u);
    }
    Ok(FeedbackRollout { trajectory: Trajectory { states, actions }, violations })
}
