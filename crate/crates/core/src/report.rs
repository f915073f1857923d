//! Solver reports shared by the projected-gradient and splitting solvers.

use nalgebra::DVector;
use serde::Serialize;

use crate::game::Trajectory;
use crate::gradient::PlayerVerdict;
use crate::linalg::{fit_line, inf_norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Tolerance,
    MaxIter,
    Divergence,
}

/// Geometric rate `r` fitted as `log d_t ~ t log r + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub rate: f64,
    /// RMS residual of the fit in log space.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares fit of the log distance trace over entries above `floor`.
pub fn fit_rate(distances: &[f64], floor: f64) -> Option<RateFit> {
    let pts: Vec<(f64, f64)> = distances
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > floor && d.is_finite())
        .map(|(t, d)| (t as f64, d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let (slope, c) = fit_line(&xs, &ys);
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - c).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
    Some(RateFit { rate: slope.exp(), residual, points: xs.len() })
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub solution: Trajectory,
    pub termination: Termination,
    pub iterations: usize,
    /// Iterates used for the distance trace (actions for projected gradient, `[x; u]` for splitting).
    pub iterates: Vec<DVector<f64>>,
    /// `|w_t - w_final|_inf` per iteration.
    pub distances: Vec<f64>,
    pub step_norms: Vec<f64>,
    /// Per-iteration player costs at the solver's feasible output.
    pub cost_history: Vec<Vec<f64>>,
    pub rate: Option<RateFit>,
    pub verdicts: Vec<PlayerVerdict>,
    pub dynamics_residual: f64,
    pub constraint_violation: f64,
    pub player_costs: Vec<f64>,
}

impl SolverReport {
    pub(crate) fn finalize_trace(&mut self) {
        if let Some(last) = self.iterates.last().cloned() {
            self.distances = self.iterates.iter().map(|w| inf_norm(&(w - &last))).collect();
        }
        let floor = 1e-12 * (1.0 + self.distances.first().copied().unwrap_or(0.0));
        self.rate = fit_rate(&self.distances[..self.distances.len().saturating_sub(1)], floor);
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Tolerance
    }
}
