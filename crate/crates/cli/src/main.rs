//! `dyngame`: solve a registered benchmark game from a TOML run configuration.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dyngame::benchmarks::{fishery_game, lq_locomotion_game, noise_comparison, rendezvous_residual};
use dyngame::feedback::{FeedbackOptions, stagewise_newton_backward};
use dyngame::parametric::SingularHandling;
use dyngame::projgrad::{ProjGradConfig, projected_gradient_solve};
use dyngame::report::Termination;
use dyngame::splitting::resolvents::InnerConfig;
use dyngame::splitting::{DrConfig, Scheme, dr_solve, initial_iterate};

use config::{GameParams, RunConfig, SolverKind};

#[derive(Debug, Parser)]
#[command(name = "dyngame", version, about = "Solve constrained dynamic games and emit traces")]
struct Args {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulation seed; overrides `simulate.seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read config: {0}")]
    Read(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("unknown game id `{0}` (expected fishery or lq_locomotion)")]
    UnknownGame(String),
    #[error("solver failed: {0}")]
    Solver(#[from] dyngame::Error),
    #[error("output error: {0}")]
    Output(String),
    #[error("solver stopped without converging ({0})")]
    NotConverged(&'static str),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Read(_) => 3,
            CliError::Config(_) => 4,
            CliError::UnknownGame(_) => 5,
            CliError::Solver(_) => 6,
            CliError::Output(_) => 7,
            CliError::NotConverged(_) => 8,
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dyngame: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(args: &Args) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| CliError::Read(format!("{}: {e}", args.config.display())))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let (Some(seed), Some(sim)) = (args.seed, cfg.simulate.as_mut()) {
        sim.seed = seed;
    }
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::Config("no output directory (use --out or output_dir)".into()))?;
    let params = cfg.game_params()?;
    let (game, noise_gain) = match &params {
        GameParams::Fishery(p) => (fishery_game(p)?, p.dt),
        GameParams::LqLocomotion(p) => (lq_locomotion_game(p)?, 1.0),
    };
    let say = |msg: String| {
        if !args.quiet {
            eprintln!("{msg}");
        }
    };

    let s = &cfg.solver;
    let mut inner = InnerConfig::default();
    inner.tol = s.inner_tol.unwrap_or(inner.tol);
    inner.max_iter = s.inner_max_iter.unwrap_or(inner.max_iter);
    let report = match s.kind {
        SolverKind::Pg => {
            let d = ProjGradConfig::default();
            let pg = ProjGradConfig {
                rho: s.rho.unwrap_or(d.rho),
                max_iter: s.max_iter.unwrap_or(d.max_iter),
                tol: s.tol.unwrap_or(d.tol),
                inner,
                active_tol: s.active_tol.unwrap_or(d.active_tol),
                run_check: s.playerwise_check,
                ..d
            };
            say(format!("projected gradient: rho {} for up to {} iterations", pg.rho, pg.max_iter));
            projected_gradient_solve(&game, &game.zero_actions(), &pg)?
        }
        SolverKind::Dr => {
            let d = DrConfig::default();
            let dr = DrConfig {
                scheme: s.scheme.unwrap_or(Scheme::SingleOutG),
                eta: s.eta.unwrap_or(d.eta),
                alpha: s.alpha.unwrap_or(d.alpha),
                max_iter: s.max_iter.unwrap_or(d.max_iter),
                tol: s.tol.unwrap_or(d.tol),
                inner,
                active_tol: s.active_tol.unwrap_or(d.active_tol),
                run_check: s.playerwise_check,
                ..d
            };
            say(format!("douglas-rachford {:?}: eta {} alpha {}", dr.scheme, dr.eta, dr.alpha));
            let w0 = initial_iterate(&game, &game.zero_actions())?;
            dr_solve(&game, &w0, &dr)?
        }
    };
    say(format!("{:?} after {} iterations; costs {:?}", report.termination, report.iterations, report.player_costs));

    let mut policy = None;
    let mut simulation = None;
    if let Some(fb) = cfg.feedback.as_ref().filter(|f| f.enabled) {
        let singular = if fb.regularization > 0.0 {
            SingularHandling::Regularized(fb.regularization)
        } else {
            SingularHandling::LeastSquares
        };
        let reference = game.rollout(&report.solution.actions)?;
        let opts = FeedbackOptions { active_tol: fb.active_tol, active: None, singular };
        let pol = stagewise_newton_backward(&game, &reference, &opts)?;
        if let Some(sim) = &cfg.simulate {
            let cmp = noise_comparison(&game, &reference, &pol, sim.noise_var, sim.n_runs, sim.seed, noise_gain)?;
            say(format!(
                "noise: open-loop msd {:.6e}, feedback msd {:.6e}",
                cmp.mean_open_loop_msd, cmp.mean_feedback_msd
            ));
            simulation = Some(cmp);
        }
        policy = Some(pol);
    }

    let rendezvous = match &params {
        GameParams::LqLocomotion(p) => Some(rendezvous_residual(p, &report.solution)),
        GameParams::Fishery(_) => None,
    };
    output::write_all(&out_dir, &cfg, &game, &report, policy.as_ref(), simulation.as_ref(), rendezvous)?;
    say(format!("wrote outputs to {}", out_dir.display()));

    match report.termination {
        Termination::Tolerance => Ok(()),
        Termination::MaxIter if !s.require_convergence => Ok(()),
        Termination::MaxIter => Err(CliError::NotConverged("iteration budget exhausted")),
        Termination::Divergence => Err(CliError::NotConverged("diverged")),
    }
}
