//! Projected-gradient iterations `u <- P_U(u - rho J(u))`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::game::{GameDefinition, Trajectory};
use crate::gradient::{playerwise_minimizer_check, pseudo_gradient_of_actions};
use crate::linalg::{inf_norm, split_vector, stack_vectors};
use crate::report::{SolverReport, Termination};
use crate::splitting::resolvents::{DynamicsHandling, InnerConfig, weighted_feasible_projection};

#[derive(Debug, Clone)]
pub struct ProjGradConfig {
    pub rho: f64,
    pub max_iter: usize,
    /// Stop when `|u_next - u|_inf <= tol`.
    pub tol: f64,
    pub inner: InnerConfig,
    pub dynamics: DynamicsHandling,
    pub active_tol: f64,
    /// Abort when `|u|_inf` exceeds this factor times `1 + |u0|_inf`.
    pub divergence_factor: f64,
    pub run_check: bool,
}

impl Default for ProjGradConfig {
    fn default() -> Self {
        Self {
            rho: 0.01,
            max_iter: 1000,
            tol: 1e-8,
            inner: InnerConfig::default(),
            dynamics: DynamicsHandling::Linearized,
            active_tol: 1e-6,
            divergence_factor: 1e8,
            run_check: true,
        }
    }
}

impl ProjGradConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Invalid(format!("step size must be positive, got {}", self.rho)));
        }
        if self.tol <= 0.0 || self.inner.tol <= 0.0 || self.max_iter == 0 {
            return Err(Error::Invalid("tolerances and iteration budget must be positive".into()));
        }
        Ok(())
    }
}

/// Whether every stage constraint has an exact projector and ignores the state, so the
/// projection decouples over stages in action space.
fn stagewise_action_projection(game: &GameDefinition) -> bool {
    (0..=game.horizon()).all(|k| match game.constraint(k) {
        None => true,
        Some(c) => {
            let x = DVector::zeros(game.state_dim());
            let u = DVector::zeros(game.joint_action_dim());
            c.is_empty() || (!c.depends_on_state() && c.project(&x, &u).is_some())
        }
    })
}

/// Closest action sequence (in the Euclidean norm on actions) whose rollout satisfies every
/// stage constraint.
pub fn project_onto_feasible(
    game: &GameDefinition,
    u_bar: &[DVector<f64>],
    handling: DynamicsHandling,
    inner: InnerConfig,
) -> Result<Vec<DVector<f64>>> {
    if !game.has_constraints() {
        return Ok(u_bar.to_vec());
    }
    if stagewise_action_projection(game) {
        let x = DVector::zeros(game.state_dim());
        return Ok(u_bar
            .iter()
            .enumerate()
            .map(|(k, u)| match game.constraint(k) {
                Some(c) if !c.is_empty() => c.project(&x, u).expect("checked above").1,
                _ => u.clone(),
            })
            .collect());
    }
    let traj = game.rollout(u_bar)?;
    if game.max_violation(&traj) == 0.0 {
        return Ok(u_bar.to_vec());
    }
    let p = weighted_feasible_projection(game, &traj, 0.0, 1.0, handling, inner)?;
    Ok(p.actions)
}

/// Runs the iteration from `u0`; divergence ends the run with a partial report.
pub fn projected_gradient_solve(game: &GameDefinition, u0: &[DVector<f64>], cfg: &ProjGradConfig) -> Result<SolverReport> {
    cfg.validate()?;
    let mut u = u0.to_vec();
    let u0_norm = inf_norm(&stack_vectors(u0));
    let bound = cfg.divergence_factor * (1.0 + u0_norm);
    let sizes = vec![game.joint_action_dim(); game.horizon() + 1];
    let mut report = SolverReport {
        solution: game.rollout(u0)?,
        termination: Termination::MaxIter,
        iterations: 0,
        iterates: vec![stack_vectors(&u)],
        distances: Vec::new(),
        step_norms: Vec::new(),
        cost_history: Vec::new(),
        rate: None,
        verdicts: Vec::new(),
        dynamics_residual: 0.0,
        constraint_violation: f64::NAN,
        player_costs: Vec::new(),
    };
    for it in 0..cfg.max_iter {
        let (_, g) = pseudo_gradient_of_actions(game, &u)?;
        let trial = stack_vectors(&u) - g.flat() * cfg.rho;
        let next = project_onto_feasible(game, &split_vector(&trial, &sizes), cfg.dynamics, cfg.inner)?;
        let flat_next = stack_vectors(&next);
        let step = inf_norm(&(&flat_next - stack_vectors(&u)));
        report.iterations = it + 1;
        report.step_norms.push(step);
        report.iterates.push(flat_next.clone());
        u = next;
        if !step.is_finite() || inf_norm(&flat_next) > bound {
            report.termination = Termination::Divergence;
            break;
        }
        match game.rollout(&u) {
            Ok(traj) => report.cost_history.push(game.player_costs(&traj)),
            Err(Error::NonFinite(_)) => {
                report.termination = Termination::Divergence;
                break;
            }
            Err(e) => return Err(e),
        }
        if step <= cfg.tol {
            report.termination = Termination::Tolerance;
            break;
        }
    }
    if report.termination != Termination::Divergence {
        let traj: Trajectory = game.rollout(&u)?;
        report.constraint_violation = game.max_violation(&traj);
        report.player_costs = game.player_costs(&traj);
        if cfg.run_check {
            report.verdicts = playerwise_minimizer_check(game, &traj, cfg.active_tol)?;
        }
        report.solution = traj;
    }
    report.finalize_trace();
    Ok(report)
}
