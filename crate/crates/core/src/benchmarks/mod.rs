//! Benchmark games and the noise-robustness experiment.

pub mod fishery;
pub mod locomotion;
pub mod noise;

pub use fishery::{FisheryParams, fishery_game, noise_gain};
pub use locomotion::{LqLocomotionParams, lq_locomotion_game, rendezvous_residual};
pub use noise::{NoiseComparison, NoiseRun, noise_comparison};
