//! Open-loop replay versus affine feedback under additive state noise.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::feedback::{FeedbackPolicy, feedback_rollout};
use crate::game::{GameDefinition, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseRun {
    pub seed: u64,
    /// Mean over stages of `‖x_k - x̄_k‖²`.
    pub open_loop_msd: f64,
    pub feedback_msd: f64,
    pub open_loop_violations: usize,
    pub feedback_violations: usize,
    /// Smallest state component seen along either rollout.
    pub min_state: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseComparison {
    pub runs: Vec<NoiseRun>,
    pub mean_open_loop_msd: f64,
    pub mean_feedback_msd: f64,
}

impl NoiseComparison {
    pub fn feedback_is_closer(&self) -> bool {
        self.mean_feedback_msd < self.mean_open_loop_msd
    }
}

fn msd(path: &[DVector<f64>], reference: &[DVector<f64>]) -> f64 {
    path.iter().zip(reference).map(|(x, r)| (x - r).norm_squared()).sum::<f64>() / path.len() as f64
}

/// Per-stage noise `gain * w_k` with `w_k ~ N(0, noise_var I)`; run `i` uses stream `seed + i`.
/// Both rollouts of a run see the same noise sequence.
pub fn noise_comparison(
    game: &GameDefinition,
    olne: &Trajectory,
    policy: &FeedbackPolicy,
    noise_var: f64,
    n_runs: usize,
    seed: u64,
    gain: f64,
) -> Result<NoiseComparison> {
    if !(noise_var >= 0.0 && noise_var.is_finite() && gain.is_finite()) {
        return Err(Error::Invalid("noise variance must be finite and nonnegative".into()));
    }
    if n_runs == 0 {
        return Err(Error::Invalid("at least one noise run is required".into()));
    }
    game.check_trajectory(olne, 1e-6 * (1.0 + crate::linalg::inf_norm(&olne.flat())))?;
    let normal = Normal::new(0.0, noise_var.sqrt()).map_err(|e| Error::Invalid(e.to_string()))?;
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(n_runs);
    let chunk = n_runs.div_ceil(threads);
    let results: Vec<Result<Vec<NoiseRun>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|c| {
                scope.spawn(move || {
                    (c * chunk..((c + 1) * chunk).min(n_runs))
                        .map(|i| single_run(game, olne, policy, &normal, seed.wrapping_add(i as u64), gain))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("noise worker panicked")).collect()
    });
    let mut runs = Vec::with_capacity(n_runs);
    for r in results {
        runs.extend(r?);
    }
    let mean = |f: fn(&NoiseRun) -> f64| runs.iter().map(f).sum::<f64>() / runs.len() as f64;
    Ok(NoiseComparison {
        mean_open_loop_msd: mean(|r| r.open_loop_msd),
        mean_feedback_msd: mean(|r| r.feedback_msd),
        runs,
    })
}

fn single_run(
    game: &GameDefinition,
    olne: &Trajectory,
    policy: &FeedbackPolicy,
    normal: &Normal<f64>,
    seed: u64,
    gain: f64,
) -> Result<NoiseRun> {
    let horizon = game.horizon();
    let nx = game.state_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<DVector<f64>> =
        (0..horizon).map(|_| DVector::from_fn(nx, |_, _| gain * normal.sample(&mut rng))).collect();

    let mut states = vec![olne.states[0].clone()];
    let mut open_violations = 0;
    for k in 0..=horizon {
        let x = states.last().unwrap().clone();
        if game.stage_violation(k, &x, &olne.actions[k]) > 1e-9 {
            open_violations += 1;
        }
        if k < horizon {
            states.push(game.dynamics(k).step(&x, &olne.actions[k]) + &noise[k]);
        }
    }
    let fb = feedback_rollout(game, policy, &olne.states[0], 0, Some(&noise))?;
    let min_state = states
        .iter()
        .chain(&fb.trajectory.states)
        .flat_map(|x| x.iter().copied())
        .fold(f64::INFINITY, f64::min);
    Ok(NoiseRun {
        seed,
        open_loop_msd: msd(&states, &olne.states),
        feedback_msd: msd(&fb.trajectory.states, &olne.states),
        open_loop_violations: open_violations,
        feedback_violations: fb.violated_stages(1e-9),
        min_state,
    })
}
