//! Open-loop and local feedback Nash equilibria for constrained discrete-time dynamic games.
//!
//! * [`game`]: game definition, rollouts, local quadratic models.
//! * [`gradient`]: the stacked pseudo-gradient and the playerwise minimizer check.
//! * [`projgrad`]: projected-gradient iterations.
//! * [`splitting`]: Douglas-Rachford splitting with three resolvent schemes.
//! * [`feedback`]: stagewise Newton feedback policies and the best-response gap.
//! * [`parametric`]: quadratic parametric games with linear constraints.
//! * [`benchmarks`]: the fishery and 2-D locomotion games, noise experiments.

pub mod benchmarks;
pub mod error;
pub mod feedback;
pub mod game;
pub mod gradient;
pub mod linalg;
pub mod lq;
pub mod parametric;
pub mod projgrad;
pub mod qp;
pub mod report;
pub mod splitting;

pub use error::{Error, Result};
pub use game::{GameBuilder, GameDefinition, Trajectory};
