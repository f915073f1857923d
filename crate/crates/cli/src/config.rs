//! Run configuration, read from TOML.

use std::path::PathBuf;

use dyngame::benchmarks::{FisheryParams, LqLocomotionParams};
use dyngame::splitting::Scheme;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameId {
    Fishery,
    LqLocomotion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Pg,
    Dr,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub scheme: Option<Scheme>,
    pub rho: Option<f64>,
    pub eta: Option<f64>,
    pub alpha: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub inner_tol: Option<f64>,
    pub inner_max_iter: Option<usize>,
    pub active_tol: Option<f64>,
    #[serde(default = "yes")]
    pub playerwise_check: bool,
    /// When false, hitting the iteration budget still exits with status 0.
    #[serde(default = "yes")]
    pub require_convergence: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_active_tol")]
    pub active_tol: f64,
    /// `mu` added to the stage-game matrix; zero selects the least-squares law on singular stages.
    #[serde(default)]
    pub regularization: f64,
}

fn default_active_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub noise_var: f64,
    pub n_runs: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub game: GameId,
    /// Overrides for the selected game's parameters.
    #[serde(default)]
    pub params: Option<toml::Table>,
    pub solver: SolverConfig,
    pub feedback: Option<FeedbackConfig>,
    pub simulate: Option<SimulateConfig>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub enum GameParams {
    Fishery(FisheryParams),
    LqLocomotion(LqLocomotionParams),
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        // Read the game id first so an unknown id gets its own diagnostic.
        let raw: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        match raw.get("game") {
            Some(toml::Value::String(id)) if !matches!(id.as_str(), "fishery" | "lq_locomotion") => {
                return Err(CliError::UnknownGame(id.clone()));
            }
            Some(toml::Value::String(_)) => {}
            _ => return Err(CliError::Config("missing string field `game`".into())),
        }
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn game_params(&self) -> Result<GameParams, CliError> {
        let table = self.params.clone().unwrap_or_default();
        let bad = |e: toml::de::Error| CliError::Config(format!("params: {}", e.message()));
        let params = match self.game {
            GameId::Fishery => {
                let p: FisheryParams = table.try_into().map_err(bad)?;
                p.validate().map_err(|e| CliError::Config(e.to_string()))?;
                GameParams::Fishery(p)
            }
            GameId::LqLocomotion => {
                let p: LqLocomotionParams = table.try_into().map_err(bad)?;
                p.validate().map_err(|e| CliError::Config(e.to_string()))?;
                GameParams::LqLocomotion(p)
            }
        };
        Ok(params)
    }

    fn validate(&self) -> Result<(), CliError> {
        let s = &self.solver;
        let positive = |name: &str, v: Option<f64>| match v {
            Some(v) if !(v > 0.0 && v.is_finite()) => Err(CliError::Config(format!("solver.{name} must be positive, got {v}"))),
            _ => Ok(()),
        };
        positive("rho", s.rho)?;
        positive("eta", s.eta)?;
        positive("tol", s.tol)?;
        positive("inner_tol", s.inner_tol)?;
        positive("active_tol", s.active_tol)?;
        if let Some(a) = s.alpha
            && !(a > 0.0 && a < 1.0)
        {
            return Err(CliError::Config(format!("solver.alpha must lie in (0, 1), got {a}")));
        }
        if s.max_iter == Some(0) || s.inner_max_iter == Some(0) {
            return Err(CliError::Config("iteration budgets must be positive".into()));
        }
        match s.kind {
            SolverKind::Pg if s.scheme.is_some() || s.eta.is_some() || s.alpha.is_some() => {
                return Err(CliError::Config("scheme, eta and alpha apply to the dr solver only".into()));
            }
            SolverKind::Dr if s.rho.is_some() => return Err(CliError::Config("rho applies to the pg solver only".into())),
            _ => {}
        }
        if let Some(f) = &self.feedback
            && !(f.active_tol > 0.0 && f.regularization >= 0.0 && f.regularization.is_finite())
        {
            return Err(CliError::Config("feedback.active_tol must be positive and regularization nonnegative".into()));
        }
        if let Some(sim) = &self.simulate {
            if !(sim.noise_var >= 0.0 && sim.noise_var.is_finite()) || sim.n_runs == 0 {
                return Err(CliError::Config("simulate needs a nonnegative noise_var and n_runs > 0".into()));
            }
            if !self.feedback.as_ref().is_some_and(|f| f.enabled) {
                return Err(CliError::Config("simulate requires an enabled feedback block".into()));
            }
        }
        self.game_params()?;
        Ok(())
    }
}
