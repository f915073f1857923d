//! Three-player planar rendezvous with single-integrator dynamics.
//!
//! Player `n` moves its own position `x_n ∈ R²` by `u_n`, pays `‖x_n - target_n‖² + effort ‖u_n‖²`
//! per stage (the position term scaled by `terminal_weight` at the final stage), keeps
//! `‖u_n‖ ≤ u_max`, and all positions must coincide at `rendezvous_stage`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::primitives::{BallConstraint, CompositeConstraint, ConsensusConstraint, LinearDynamics, QuadraticCost};
use crate::game::{GameBuilder, GameDefinition, StageConstraint, StageCost, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LqLocomotionParams {
    pub horizon: usize,
    pub x0: Vec<f64>,
    pub targets: Vec<f64>,
    pub u_max: f64,
    pub effort_weight: f64,
    pub terminal_weight: f64,
    pub rendezvous_stage: usize,
}

impl Default for LqLocomotionParams {
    fn default() -> Self {
        Self {
            horizon: 10,
            x0: vec![1.0, 1.0, -2.0, 0.0, 4.0, 0.0],
            targets: vec![4.0, 12.0, -2.0, 10.0, 10.0, 10.0],
            u_max: 2.0,
            effort_weight: 10.0,
            terminal_weight: 1000.0,
            rendezvous_stage: 5,
        }
    }
}

const POS: usize = 2;

impl LqLocomotionParams {
    pub fn players(&self) -> usize {
        self.x0.len() / POS
    }

    pub fn validate(&self) -> Result<()> {
        if self.x0.is_empty() || !self.x0.len().is_multiple_of(POS) || self.targets.len() != self.x0.len() {
            return Err(Error::Invalid("x0 and targets must hold one planar position per player".into()));
        }
        if self.horizon == 0 || self.rendezvous_stage > self.horizon {
            return Err(Error::Invalid("rendezvous stage must lie within a positive horizon".into()));
        }
        if ![self.u_max, self.effort_weight, self.terminal_weight].iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(Error::Invalid("u_max and weights must be positive".into()));
        }
        if self.x0.iter().chain(&self.targets).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("positions must be finite".into()));
        }
        Ok(())
    }
}

fn player_cost(p: &LqLocomotionParams, n: usize, weight: f64) -> QuadraticCost {
    let nx = p.x0.len();
    let nu = nx;
    let mut qx = DMatrix::zeros(nx, nx);
    let mut ru = DMatrix::zeros(nu, nu);
    for i in n * POS..(n + 1) * POS {
        qx[(i, i)] = 2.0 * weight;
        ru[(i, i)] = 2.0 * p.effort_weight;
    }
    QuadraticCost::tracking(&qx, &DVector::from_vec(p.targets.clone()), &ru, &DVector::zeros(nu))
}

pub fn lq_locomotion_game(params: &LqLocomotionParams) -> Result<GameDefinition> {
    params.validate()?;
    let nx = params.x0.len();
    let np = params.players();
    let ball: Arc<dyn StageConstraint> =
        Arc::new(BallConstraint { blocks: (0..np).map(|n| (n * POS, POS, params.u_max)).collect() });
    let meet: Arc<dyn StageConstraint> = Arc::new(ConsensusConstraint {
        offsets: (0..np).map(|n| n * POS).collect(),
        width: POS,
        state_dim: nx,
    });
    let mut b = GameBuilder::new(params.horizon, DVector::from_vec(params.x0.clone()), vec![POS; np])
        .dynamics_all(Arc::new(LinearDynamics::new(DMatrix::identity(nx, nx), DMatrix::identity(nx, nx), DVector::zeros(nx))))
        .constraint_all(ball.clone());
    if np > 1 {
        b = b.constraint(params.rendezvous_stage, Arc::new(CompositeConstraint::new(vec![meet, ball])));
    }
    for n in 0..np {
        let running: Arc<dyn StageCost> = Arc::new(player_cost(params, n, 1.0));
        let terminal: Arc<dyn StageCost> = Arc::new(player_cost(params, n, params.terminal_weight));
        b = b.running_cost(n, running).terminal_cost(n, terminal);
    }
    b.build()
}

/// `Σ_n ‖x_{n,k} - x_{n+1,k}‖` at the rendezvous stage.
pub fn rendezvous_residual(params: &LqLocomotionParams, traj: &Trajectory) -> f64 {
    let x = &traj.states[params.rendezvous_stage];
    (1..params.players()).map(|n| (x.rows((n - 1) * POS, POS) - x.rows(n * POS, POS)).norm()).sum()
}
