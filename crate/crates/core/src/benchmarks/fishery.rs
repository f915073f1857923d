//! Two-player common-property fishery.
//!
//! Biomass follows `x' = x + [g(x) - sum_n q_n u_n x] dt` with logistic-type growth
//! `g(x) = r/h^2 (2 h x - x^2)`; player `n` earns `(p_n q_n x - e_n) u_n dt` per stage and
//! its cost is the negated profit. Efforts are boxed to `[0, u_max_n]`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::primitives::BoxConstraint;
use crate::game::{Dynamics, GameBuilder, GameDefinition, StageCost};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FisheryParams {
    pub u_max: Vec<f64>,
    pub r: f64,
    pub h: f64,
    pub dt: f64,
    /// Continuous horizon; the game has `duration / dt` stages.
    pub duration: f64,
    pub q: Vec<f64>,
    pub price: Vec<f64>,
    pub effort_cost: Vec<f64>,
    pub noise_variance: f64,
    pub x0: f64,
}

impl Default for FisheryParams {
    fn default() -> Self {
        Self {
            u_max: vec![0.4, 0.3],
            r: 8.0,
            h: 100.0,
            dt: 0.1,
            duration: 100.0,
            q: vec![0.1, 0.1],
            price: vec![1.0, 1.0],
            effort_cost: vec![9.0, 11.0],
            noise_variance: 2.0,
            x0: 50.0,
        }
    }
}

impl FisheryParams {
    pub fn stages(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn growth(&self, x: f64) -> f64 {
        self.r / (self.h * self.h) * (2.0 * self.h * x - x * x)
    }

    /// Biomass at which player `n`'s marginal profit vanishes.
    pub fn bionomic_equilibrium(&self, n: usize) -> f64 {
        self.effort_cost[n] / (self.price[n] * self.q[n])
    }

    pub fn validate(&self) -> Result<()> {
        let np = self.u_max.len();
        if np == 0 || [self.q.len(), self.price.len(), self.effort_cost.len()].iter().any(|&l| l != np) {
            return Err(Error::Invalid("fishery per-player parameter lists must share one nonzero length".into()));
        }
        let scalars = [self.r, self.h, self.dt, self.duration];
        if scalars.iter().chain(&self.u_max).chain(&self.q).chain(&self.price).chain(&self.effort_cost).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Invalid("fishery parameters must be positive and finite".into()));
        }
        if self.noise_variance < 0.0 || !self.x0.is_finite() {
            return Err(Error::Invalid("noise variance must be nonnegative and x0 finite".into()));
        }
        let stages = self.duration / self.dt;
        if (stages - stages.round()).abs() > 1e-9 * stages.max(1.0) || stages.round() < 1.0 {
            return Err(Error::Invalid("duration / dt must be a positive integer".into()));
        }
        Ok(())
    }
}

struct FisheryDynamics {
    p: FisheryParams,
}

impl Dynamics for FisheryDynamics {
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let harvest: f64 = self.p.q.iter().zip(u.iter()).map(|(q, u)| q * u).sum::<f64>() * x[0];
        DVector::from_element(1, x[0] + (self.p.growth(x[0]) - harvest) * self.p.dt)
    }

    fn jacobians(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let p = &self.p;
        let qu: f64 = p.q.iter().zip(u.iter()).map(|(q, u)| q * u).sum();
        let a = 1.0 + (p.r / (p.h * p.h) * (2.0 * p.h - 2.0 * x[0]) - qu) * p.dt;
        let b = DMatrix::from_fn(1, u.len(), |_, j| -p.q[j] * x[0] * p.dt);
        Some((DMatrix::from_element(1, 1, a), b))
    }

    fn hessians(&self, _x: &DVector<f64>, u: &DVector<f64>) -> Option<Vec<DMatrix<f64>>> {
        let p = &self.p;
        let n = 1 + u.len();
        let mut h = DMatrix::zeros(n, n);
        h[(0, 0)] = -2.0 * p.r / (p.h * p.h) * p.dt;
        for j in 0..u.len() {
            h[(0, 1 + j)] = -p.q[j] * p.dt;
            h[(1 + j, 0)] = -p.q[j] * p.dt;
        }
        Some(vec![h])
    }
}

/// Negated stage profit of one player.
struct FisheryCost {
    player: usize,
    p: FisheryParams,
}

impl FisheryCost {
    fn margin(&self, x: f64) -> f64 {
        let n = self.player;
        self.p.price[n] * self.p.q[n] * x - self.p.effort_cost[n]
    }
}

impl StageCost for FisheryCost {
    fn value(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        -self.margin(x[0]) * u[self.player] * self.p.dt
    }

    fn gradient(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let n = self.player;
        let gx = DVector::from_element(1, -self.p.price[n] * self.p.q[n] * u[n] * self.p.dt);
        let mut gu = DVector::zeros(u.len());
        gu[n] = -self.margin(x[0]) * self.p.dt;
        Some((gx, gu))
    }

    fn hessian(&self, _x: &DVector<f64>, u: &DVector<f64>) -> Option<DMatrix<f64>> {
        let n = self.player;
        let mut h = DMatrix::zeros(1 + u.len(), 1 + u.len());
        let c = -self.p.price[n] * self.p.q[n] * self.p.dt;
        h[(0, 1 + n)] = c;
        h[(1 + n, 0)] = c;
        Some(h)
    }
}

pub fn fishery_game(params: &FisheryParams) -> Result<GameDefinition> {
    params.validate()?;
    let np = params.u_max.len();
    let t = params.stages();
    let bounds = Arc::new(BoxConstraint { lower: DVector::zeros(np), upper: DVector::from_vec(params.u_max.clone()) });
    let mut b = GameBuilder::new(t, DVector::from_element(1, params.x0), vec![1; np])
        .dynamics_all(Arc::new(FisheryDynamics { p: params.clone() }))
        .constraint_all(bounds);
    for n in 0..np {
        let c: Arc<dyn StageCost> = Arc::new(FisheryCost { player: n, p: params.clone() });
        b = b.running_cost(n, c.clone()).terminal_cost(n, c);
    }
    b.build()
}

/// Additive state noise `w_k dt` used in noisy fishery rollouts.
pub fn noise_gain(params: &FisheryParams) -> f64 {
    params.dt
}
