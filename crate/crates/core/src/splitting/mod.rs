//! Douglas-Rachford splitting for the inclusion `0 in J_xu + N_D + N_G`.
//!
//! Each scheme pairs one operator with the sum of the other two:
//! * [`Scheme::SingleOutG`]: `(eta J_xu + N_D)` then `N_G`;
//! * [`Scheme::SingleOutD`]: `(eta J_xu + N_G)` then `N_D`;
//! * [`Scheme::SingleOutJ`]: `(N_D + N_G)` then `eta J_xu`.

pub mod resolvents;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::openloop::NewtonConfig;
use crate::game::{GameDefinition, Trajectory};
use crate::gradient::playerwise_minimizer_check;
use crate::linalg::inf_norm;
use crate::report::{SolverReport, Termination};
use resolvents::{
    DynamicsHandling, InnerConfig, constrained_oc_projection, project_dynamics, project_stage_constraints, resolvent_reg_game,
    resolvent_reg_static_games, resolvent_static_games_uncon,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    SingleOutG,
    SingleOutD,
    SingleOutJ,
}

#[derive(Debug, Clone)]
pub struct DrConfig {
    pub scheme: Scheme,
    pub eta: f64,
    pub alpha: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub inner: InnerConfig,
    pub newton: NewtonConfig,
    pub dynamics: DynamicsHandling,
    pub active_tol: f64,
    pub run_check: bool,
}

impl Default for DrConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::SingleOutG,
            eta: 1e-4,
            alpha: 0.5,
            max_iter: 10_000,
            tol: 1e-8,
            inner: InnerConfig::default(),
            newton: NewtonConfig::default(),
            dynamics: DynamicsHandling::Exact,
            active_tol: 1e-6,
            run_check: true,
        }
    }
}

impl DrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.eta <= 0.0 || !self.eta.is_finite() {
            return Err(Error::Invalid(format!("eta must be positive, got {}", self.eta)));
        }
        if self.tol <= 0.0 || self.max_iter == 0 {
            return Err(Error::Invalid("tolerance and iteration budget must be positive".into()));
        }
        Ok(())
    }
}

fn first_resolvent(game: &GameDefinition, v: &Trajectory, cfg: &DrConfig) -> Result<Trajectory> {
    match cfg.scheme {
        Scheme::SingleOutG => resolvent_reg_game(game, v, cfg.eta, cfg.newton),
        Scheme::SingleOutD => resolvent_reg_static_games(game, v, cfg.eta, cfg.inner),
        Scheme::SingleOutJ => constrained_oc_projection(game, v, cfg.dynamics, cfg.inner),
    }
}

fn second_resolvent(game: &GameDefinition, v: &Trajectory, cfg: &DrConfig) -> Result<Trajectory> {
    match cfg.scheme {
        Scheme::SingleOutG => project_stage_constraints(game, v),
        Scheme::SingleOutD => project_dynamics(game, v, cfg.dynamics),
        Scheme::SingleOutJ => resolvent_static_games_uncon(game, v, cfg.eta, cfg.newton),
    }
}

/// Douglas-Rachford iterations `w <- (1 - alpha) w + alpha R_2 R_1 w` from `w0`.
pub fn dr_solve(game: &GameDefinition, w0: &Trajectory, cfg: &DrConfig) -> Result<SolverReport> {
    cfg.validate()?;
    let mut w = w0.clone();
    let bound = 1e8 * (1.0 + inf_norm(&w0.flat()));
    let mut report = SolverReport {
        solution: w0.clone(),
        termination: Termination::MaxIter,
        iterations: 0,
        iterates: vec![w.flat()],
        distances: Vec::new(),
        step_norms: Vec::new(),
        cost_history: Vec::new(),
        rate: None,
        verdicts: Vec::new(),
        dynamics_residual: f64::NAN,
        constraint_violation: f64::NAN,
        player_costs: Vec::new(),
    };
    let mut last = None;
    for it in 0..cfg.max_iter {
        let a = first_resolvent(game, &w, cfg)?;
        let v = a.combine(2.0, &w, -1.0);
        let b = second_resolvent(game, &v, cfg)?;
        let v = b.combine(2.0, &v, -1.0);
        let next = w.combine(1.0 - cfg.alpha, &v, cfg.alpha);
        let step = next.distance(&w);
        w = next;
        let rolled = game.rollout(&b.actions)?;
        report.cost_history.push(game.player_costs(&rolled));
        report.iterates.push(w.flat());
        report.step_norms.push(step);
        report.iterations = it + 1;
        // Feasibility of an inner-solved resolvent is only as good as the inner tolerance.
        let feas = game.dynamics_residual(&b).max(game.max_violation(&b));
        let done = step <= cfg.tol && feas <= cfg.tol.max(10.0 * cfg.inner.tol);
        last = Some(b);
        if !step.is_finite() || inf_norm(&w.flat()) > bound {
            report.termination = Termination::Divergence;
            break;
        }
        if done {
            report.termination = Termination::Tolerance;
            break;
        }
    }
    let solution = last.unwrap_or_else(|| w0.clone());
    report.dynamics_residual = game.dynamics_residual(&solution);
    report.constraint_violation = game.max_violation(&solution);
    let rolled = game.rollout(&solution.actions)?;
    report.player_costs = game.player_costs(&rolled);
    if cfg.run_check && report.termination != Termination::Divergence {
        report.verdicts = playerwise_minimizer_check(game, &rolled, cfg.active_tol)?;
    }
    report.solution = solution;
    report.finalize_trace();
    Ok(report)
}

/// `[x; u]` layout helper: the initial DR iterate from an action guess, states by rollout.
pub fn initial_iterate(game: &GameDefinition, actions: &[DVector<f64>]) -> Result<Trajectory> {
    game.rollout(actions)
}
