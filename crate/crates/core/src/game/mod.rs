//! Game definition: horizon, dynamics, per-player stage costs and shared stage constraints.
//!
//! Stages run `k = 0..=T`. Dynamics exist for `k < T`; the stage-`T` action block enters only
//! the terminal costs and constraints.

pub mod derivatives;
pub mod model;
pub mod primitives;
pub mod quadraticize;

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result, check_dim};
use crate::linalg::inf_norm;
pub use model::{AffineMap, AffineRows, Dynamics, StageConstraint, StageCost};
use primitives::{Tightened, resize_affine};

/// States `x_0..x_T` and joint actions `u_0..u_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub actions: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn flat_actions(&self) -> DVector<f64> {
        crate::linalg::stack_vectors(&self.actions)
    }

    pub fn flat(&self) -> DVector<f64> {
        let mut parts = self.states.clone();
        parts.extend(self.actions.iter().cloned());
        crate::linalg::stack_vectors(&parts)
    }

    /// Max-norm distance over states and actions.
    pub fn distance(&self, other: &Trajectory) -> f64 {
        let sx = self.states.iter().zip(&other.states).map(|(a, b)| inf_norm(&(a - b)));
        let su = self.actions.iter().zip(&other.actions).map(|(a, b)| inf_norm(&(a - b)));
        sx.chain(su).fold(0.0, f64::max)
    }

    pub fn action_distance(&self, other: &Trajectory) -> f64 {
        self.actions.iter().zip(&other.actions).map(|(a, b)| inf_norm(&(a - b))).fold(0.0, f64::max)
    }

    fn lin(&self, a: f64, other: &Trajectory, b: f64) -> Trajectory {
        Trajectory {
            states: self.states.iter().zip(&other.states).map(|(x, y)| x * a + y * b).collect(),
            actions: self.actions.iter().zip(&other.actions).map(|(x, y)| x * a + y * b).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Trajectory, b: f64) -> Trajectory {
        self.lin(a, other, b)
    }
}

pub struct GameDefinition {
    horizon: usize,
    state_dim: usize,
    action_dims: Vec<usize>,
    offsets: Vec<usize>,
    x0: DVector<f64>,
    dynamics: Vec<Arc<dyn Dynamics>>,
    costs: Vec<Vec<Arc<dyn StageCost>>>,
    constraints: Vec<Option<Arc<dyn StageConstraint>>>,
    tightening: Vec<Option<DVector<f64>>>,
}

impl std::fmt::Debug for GameDefinition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GameDefinition")
            .field("horizon", &self.horizon)
            .field("state_dim", &self.state_dim)
            .field("action_dims", &self.action_dims)
            .finish_non_exhaustive()
    }
}

impl GameDefinition {
    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn state_dim(&self) -> usize {
        self.state_dim
    }
    pub fn action_dims(&self) -> &[usize] {
        &self.action_dims
    }
    pub fn num_players(&self) -> usize {
        self.action_dims.len()
    }
    pub fn joint_action_dim(&self) -> usize {
        self.action_dims.iter().sum()
    }
    pub fn action_offset(&self, player: usize) -> usize {
        self.offsets[player]
    }
    pub fn initial_state(&self) -> &DVector<f64> {
        &self.x0
    }
    pub fn dynamics(&self, k: usize) -> &dyn Dynamics {
        self.dynamics[k].as_ref()
    }
    pub fn cost(&self, player: usize, k: usize) -> &dyn StageCost {
        self.costs[player][k].as_ref()
    }
    pub fn constraint(&self, k: usize) -> Option<&dyn StageConstraint> {
        self.constraints[k].as_deref()
    }
    pub fn tightening(&self, k: usize) -> Option<&DVector<f64>> {
        self.tightening[k].as_ref()
    }
    pub fn has_constraints(&self) -> bool {
        self.constraints.iter().any(|c| c.as_ref().is_some_and(|c| !c.is_empty()))
    }

    /// Number of constraint rows at stage `k`.
    pub fn constraint_len(&self, k: usize) -> usize {
        self.constraints[k].as_ref().map_or(0, |c| c.len())
    }

    /// Player `n`'s slice of a joint action.
    pub fn player_action(&self, u: &DVector<f64>, player: usize) -> DVector<f64> {
        u.rows(self.offsets[player], self.action_dims[player]).into_owned()
    }

    /// Stage-wise affine dynamics, if every stage is affine.
    pub fn affine_dynamics(&self) -> Option<Vec<AffineMap>> {
        self.dynamics.iter().map(|d| d.affine()).collect()
    }

    /// Affine stage constraint rows padded to the game dimensions.
    pub fn affine_constraint(&self, k: usize) -> Option<AffineRows> {
        let c = self.constraints[k].as_ref()?;
        c.affine().map(|a| resize_affine(a, self.state_dim, self.joint_action_dim()))
    }

    pub fn zero_actions(&self) -> Vec<DVector<f64>> {
        vec![DVector::zeros(self.joint_action_dim()); self.horizon + 1]
    }

    pub fn check_stage(&self, k: usize) -> Result<()> {
        if k > self.horizon {
            Err(Error::StageOutOfRange { stage: k, horizon: self.horizon })
        } else {
            Ok(())
        }
    }

    fn check_actions(&self, actions: &[DVector<f64>]) -> Result<()> {
        check_dim("number of action stages", self.horizon + 1, actions.len())?;
        for (k, u) in actions.iter().enumerate() {
            check_dim(format!("joint action at stage {k}"), self.joint_action_dim(), u.len())?;
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("action at stage {k}")));
            }
        }
        Ok(())
    }

    /// Forward simulation from the initial state.
    pub fn rollout(&self, actions: &[DVector<f64>]) -> Result<Trajectory> {
        self.check_actions(actions)?;
        let mut states = Vec::with_capacity(self.horizon + 1);
        states.push(self.x0.clone());
        for k in 0..self.horizon {
            let next = self.dynamics[k].step(&states[k], &actions[k]);
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("state at stage {}", k + 1)));
            }
            states.push(next);
        }
        Ok(Trajectory { states, actions: actions.to_vec() })
    }

    pub fn player_costs(&self, traj: &Trajectory) -> Vec<f64> {
        (0..self.num_players())
            .map(|n| (0..=self.horizon).map(|k| self.costs[n][k].value(&traj.states[k], &traj.actions[k])).sum())
            .collect()
    }

    pub fn constraint_values(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.constraints[k].as_ref().map_or_else(|| DVector::zeros(0), |c| c.value(x, u))
    }

    /// Largest violation at stage `k`: `|g|` on equality rows, `max(g, 0)` otherwise.
    pub fn stage_violation(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let Some(c) = self.constraints[k].as_ref() else { return 0.0 };
        let g = c.value(x, u);
        let ne = c.equality_rows();
        g.iter().enumerate().map(|(i, v)| if i < ne { v.abs() } else { v.max(0.0) }).fold(0.0, f64::max)
    }

    pub fn max_violation(&self, traj: &Trajectory) -> f64 {
        (0..=self.horizon).map(|k| self.stage_violation(k, &traj.states[k], &traj.actions[k])).fold(0.0, f64::max)
    }

    /// `max_k |x_{k+1} - f_k(x_k, u_k)|_inf` plus the initial-state mismatch.
    pub fn dynamics_residual(&self, traj: &Trajectory) -> f64 {
        let mut r = inf_norm(&(&traj.states[0] - &self.x0));
        for k in 0..self.horizon {
            r = r.max(inf_norm(&(&traj.states[k + 1] - self.dynamics[k].step(&traj.states[k], &traj.actions[k]))));
        }
        r
    }

    /// Copy of the game with every stage cost replaced by `f(player, stage, cost)`.
    /// Constraints and tightening are kept only when `keep_constraints` is set.
    pub fn map_costs(
        &self,
        f: impl Fn(usize, usize, Arc<dyn StageCost>) -> Arc<dyn StageCost>,
        keep_constraints: bool,
    ) -> GameDefinition {
        GameDefinition {
            horizon: self.horizon,
            state_dim: self.state_dim,
            action_dims: self.action_dims.clone(),
            offsets: self.offsets.clone(),
            x0: self.x0.clone(),
            dynamics: self.dynamics.clone(),
            costs: self
                .costs
                .iter()
                .enumerate()
                .map(|(n, row)| row.iter().enumerate().map(|(k, c)| f(n, k, c.clone())).collect())
                .collect(),
            constraints: if keep_constraints { self.constraints.clone() } else { vec![None; self.horizon + 1] },
            tightening: if keep_constraints { self.tightening.clone() } else { vec![None; self.horizon + 1] },
        }
    }

    /// Rejects trajectories with wrong shapes or that violate the dynamics beyond `tol`.
    pub fn check_trajectory(&self, traj: &Trajectory, tol: f64) -> Result<()> {
        check_dim("number of state stages", self.horizon + 1, traj.states.len())?;
        for (k, x) in traj.states.iter().enumerate() {
            check_dim(format!("state at stage {k}"), self.state_dim, x.len())?;
        }
        self.check_actions(&traj.actions)?;
        let r0 = inf_norm(&(&traj.states[0] - &self.x0));
        if r0 > tol {
            return Err(Error::InfeasibleTrajectory { stage: 0, residual: r0 });
        }
        for k in 0..self.horizon {
            let r = inf_norm(&(&traj.states[k + 1] - self.dynamics[k].step(&traj.states[k], &traj.actions[k])));
            if r > tol {
                return Err(Error::InfeasibleTrajectory { stage: k + 1, residual: r });
            }
        }
        Ok(())
    }
}

/// Incremental constructor that validates dimensions on [`GameBuilder::build`].
pub struct GameBuilder {
    horizon: usize,
    x0: DVector<f64>,
    action_dims: Vec<usize>,
    dynamics: Vec<Option<Arc<dyn Dynamics>>>,
    costs: Vec<Vec<Option<Arc<dyn StageCost>>>>,
    constraints: Vec<Option<Arc<dyn StageConstraint>>>,
    tightening: Vec<Option<DVector<f64>>>,
}

impl GameBuilder {
    pub fn new(horizon: usize, x0: DVector<f64>, action_dims: Vec<usize>) -> Self {
        let n = action_dims.len();
        Self {
            horizon,
            x0,
            action_dims,
            dynamics: vec![None; horizon],
            costs: vec![vec![None; horizon + 1]; n],
            constraints: vec![None; horizon + 1],
            tightening: vec![None; horizon + 1],
        }
    }

    pub fn dynamics(mut self, k: usize, d: Arc<dyn Dynamics>) -> Self {
        if k < self.horizon {
            self.dynamics[k] = Some(d);
        }
        self
    }

    pub fn dynamics_all(mut self, d: Arc<dyn Dynamics>) -> Self {
        self.dynamics.iter_mut().for_each(|s| *s = Some(d.clone()));
        self
    }

    pub fn cost(mut self, player: usize, k: usize, c: Arc<dyn StageCost>) -> Self {
        if player < self.costs.len() && k <= self.horizon {
            self.costs[player][k] = Some(c);
        }
        self
    }

    /// Same cost at stages `0..T`.
    pub fn running_cost(mut self, player: usize, c: Arc<dyn StageCost>) -> Self {
        if player < self.costs.len() {
            for k in 0..self.horizon {
                self.costs[player][k] = Some(c.clone());
            }
        }
        self
    }

    pub fn terminal_cost(self, player: usize, c: Arc<dyn StageCost>) -> Self {
        let t = self.horizon;
        self.cost(player, t, c)
    }

    pub fn constraint(mut self, k: usize, g: Arc<dyn StageConstraint>) -> Self {
        if k <= self.horizon {
            self.constraints[k] = Some(g);
        }
        self
    }

    pub fn constraint_all(mut self, g: Arc<dyn StageConstraint>) -> Self {
        self.constraints.iter_mut().for_each(|s| *s = Some(g.clone()));
        self
    }

    /// Replace `g_k <= 0` by `g_k + gamma <= 0`.
    pub fn tighten(mut self, k: usize, gamma: DVector<f64>) -> Self {
        if k <= self.horizon {
            self.tightening[k] = Some(gamma);
        }
        self
    }

    pub fn build(self) -> Result<GameDefinition> {
        if self.horizon == 0 {
            return Err(Error::Invalid("horizon must be at least 1".into()));
        }
        if self.action_dims.is_empty() {
            return Err(Error::Invalid("game needs at least one player".into()));
        }
        let nx = self.x0.len();
        let nu: usize = self.action_dims.iter().sum();
        let (zx, zu) = (DVector::zeros(nx), DVector::zeros(nu));
        let mut dynamics = Vec::with_capacity(self.horizon);
        for (k, d) in self.dynamics.into_iter().enumerate() {
            let d = d.ok_or_else(|| Error::Invalid(format!("missing dynamics at stage {k}")))?;
            if let Some(a) = d.affine() {
                check_dim(format!("dynamics A rows at stage {k}"), nx, a.a.nrows())?;
                check_dim(format!("dynamics A cols at stage {k}"), nx, a.a.ncols())?;
                check_dim(format!("dynamics B cols at stage {k}"), nu, a.b.ncols())?;
            }
            check_dim(format!("dynamics output at stage {k}"), nx, d.step(&zx, &zu).len())?;
            dynamics.push(d);
        }
        let mut costs = Vec::with_capacity(self.costs.len());
        for (n, row) in self.costs.into_iter().enumerate() {
            let mut r = Vec::with_capacity(row.len());
            for (k, c) in row.into_iter().enumerate() {
                let c = c.ok_or_else(|| Error::Invalid(format!("missing cost for player {n} at stage {k}")))?;
                if let Some((gx, gu)) = c.gradient(&zx, &zu) {
                    check_dim(format!("cost gradient (x) of player {n} at stage {k}"), nx, gx.len())?;
                    check_dim(format!("cost gradient (u) of player {n} at stage {k}"), nu, gu.len())?;
                }
                r.push(c);
            }
            costs.push(r);
        }
        let mut constraints = self.constraints;
        for (k, g) in constraints.iter_mut().enumerate() {
            if let Some(c) = g.as_ref() {
                check_dim(format!("constraint rows at stage {k}"), c.len(), c.value(&zx, &zu).len())?;
                if c.equality_rows() > c.len() {
                    return Err(Error::Invalid(format!("more equality rows than rows at stage {k}")));
                }
            }
            if let Some(gamma) = &self.tightening[k] {
                let inner = g.clone().ok_or_else(|| Error::Invalid(format!("tightening without constraint at stage {k}")))?;
                check_dim(format!("tightening at stage {k}"), inner.len(), gamma.len())?;
                *g = Some(Arc::new(Tightened { inner, gamma: gamma.clone() }));
            }
        }
        let mut offsets = Vec::with_capacity(self.action_dims.len());
        let mut off = 0;
        for d in &self.action_dims {
            offsets.push(off);
            off += d;
        }
        Ok(GameDefinition {
            horizon: self.horizon,
            state_dim: nx,
            action_dims: self.action_dims,
            offsets,
            x0: self.x0,
            dynamics,
            costs,
            constraints,
            tightening: self.tightening,
        })
    }
}

/// Default tightening margin `1e-2 (1 + |p_i|)` for affine rows with offset `p`.
pub fn default_tightening(p: &DVector<f64>) -> DVector<f64> {
    p.map(|v| 1e-2 * (1.0 + v.abs()))
}
