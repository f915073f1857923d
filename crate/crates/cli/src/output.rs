//! CSV and JSON artifacts of a run.

use std::fs;
use std::path::Path;

use dyngame::GameDefinition;
use dyngame::benchmarks::NoiseComparison;
use dyngame::feedback::FeedbackPolicy;
use dyngame::report::SolverReport;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::CliError;
use crate::config::RunConfig;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn io<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Output(e.to_string())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

#[derive(Serialize)]
struct Report<'a> {
    game: &'a str,
    solver: &'a str,
    termination: dyngame::report::Termination,
    iterations: usize,
    rate: Option<dyngame::report::RateFit>,
    verdicts: &'a [dyngame::gradient::PlayerVerdict],
    player_costs: &'a [f64],
    dynamics_residual: f64,
    constraint_violation: f64,
    /// Negated costs, for games whose costs are negated profits.
    #[serde(skip_serializing_if = "Option::is_none")]
    player_profits: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rendezvous_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    feedback: Option<FeedbackSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulation: Option<SimulationSummary>,
}

#[derive(Serialize)]
struct FeedbackSummary {
    max_offset: f64,
    max_gain: f64,
}

#[derive(Serialize)]
struct SimulationSummary {
    runs: usize,
    mean_open_loop_msd: f64,
    mean_feedback_msd: f64,
    feedback_is_closer: bool,
    open_loop_violation_stages: usize,
    feedback_violation_stages: usize,
    min_state: f64,
}

#[derive(Serialize)]
struct PolicyStage {
    k: usize,
    state: Vec<f64>,
    action: Vec<f64>,
    gain: Vec<Vec<f64>>,
    offset: Vec<f64>,
    active: Vec<usize>,
}

pub fn write_all(
    dir: &Path,
    cfg: &RunConfig,
    game: &GameDefinition,
    report: &SolverReport,
    policy: Option<&FeedbackPolicy>,
    simulation: Option<&NoiseComparison>,
    rendezvous_residual: Option<f64>,
) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io)?;
    write_trajectory(dir, game, report)?;
    write_convergence(dir, report)?;

    let game_name = match cfg.game {
        crate::config::GameId::Fishery => "fishery",
        crate::config::GameId::LqLocomotion => "lq_locomotion",
    };
    let solver = match cfg.solver.kind {
        crate::config::SolverKind::Pg => "pg",
        crate::config::SolverKind::Dr => "dr",
    };
    let summary = Report {
        game: game_name,
        solver,
        termination: report.termination,
        iterations: report.iterations,
        rate: report.rate,
        verdicts: &report.verdicts,
        player_costs: &report.player_costs,
        dynamics_residual: report.dynamics_residual,
        constraint_violation: report.constraint_violation,
        player_profits: matches!(cfg.game, crate::config::GameId::Fishery)
            .then(|| report.player_costs.iter().map(|c| -c).collect()),
        rendezvous_residual,
        feedback: policy.map(|p| FeedbackSummary {
            max_offset: p.max_offset(),
            max_gain: p.gains.iter().map(|k| k.abs().max()).fold(0.0, f64::max),
        }),
        simulation: simulation.map(|s| SimulationSummary {
            runs: s.runs.len(),
            mean_open_loop_msd: s.mean_open_loop_msd,
            mean_feedback_msd: s.mean_feedback_msd,
            feedback_is_closer: s.feedback_is_closer(),
            open_loop_violation_stages: s.runs.iter().map(|r| r.open_loop_violations).sum(),
            feedback_violation_stages: s.runs.iter().map(|r| r.feedback_violations).sum(),
            min_state: s.runs.iter().map(|r| r.min_state).fold(f64::INFINITY, f64::min),
        }),
    };
    write_json(&dir.join("report.json"), &summary)?;

    if let Some(p) = policy {
        let stages: Vec<PolicyStage> = (0..=p.horizon())
            .map(|k| PolicyStage {
                k,
                state: vec(&p.reference.states[k]),
                action: vec(&p.reference.actions[k]),
                gain: rows(&p.gains[k]),
                offset: vec(&p.offsets[k]),
                active: p.active[k].clone(),
            })
            .collect();
        write_json(&dir.join("policy.json"), &stages)?;
    }
    if let Some(s) = simulation {
        let mut w = csv::Writer::from_path(dir.join("simulation.csv")).map_err(io)?;
        w.write_record(["run", "seed", "open_loop_msd", "feedback_msd", "open_loop_violations", "feedback_violations"])
            .map_err(io)?;
        for (i, r) in s.runs.iter().enumerate() {
            w.write_record([
                i.to_string(),
                r.seed.to_string(),
                num(r.open_loop_msd),
                num(r.feedback_msd),
                r.open_loop_violations.to_string(),
                r.feedback_violations.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(io)?;
    text.push('\n');
    fs::write(path, text).map_err(io)
}

fn write_trajectory(dir: &Path, game: &GameDefinition, report: &SolverReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(dir.join("trajectory.csv")).map_err(io)?;
    let mut header = vec!["k".to_string()];
    header.extend((0..game.state_dim()).map(|i| format!("x{i}")));
    for (n, &d) in game.action_dims().iter().enumerate() {
        header.extend((0..d).map(|i| format!("u{}_{i}", n + 1)));
    }
    w.write_record(&header).map_err(io)?;
    let t = &report.solution;
    for k in 0..=game.horizon() {
        let mut rec = vec![k.to_string()];
        rec.extend(t.states[k].iter().map(|v| num(*v)));
        rec.extend(t.actions[k].iter().map(|v| num(*v)));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn write_convergence(dir: &Path, report: &SolverReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(dir.join("convergence.csv")).map_err(io)?;
    w.write_record(["iteration", "distance_to_final", "step_norm"]).map_err(io)?;
    for (i, d) in report.distances.iter().enumerate() {
        let step = if i == 0 { String::new() } else { report.step_norms.get(i - 1).map_or(String::new(), |s| num(*s)) };
        w.write_record([i.to_string(), num(*d), step]).map_err(io)?;
    }
    w.flush().map_err(io)
}
