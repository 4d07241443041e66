// comparisons written as `!(x > 0.0)` deliberately treat NaN as a failure
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Simulation library for distributed, measurement-only seeking of
//! generalized Nash equilibria in games with local inequality constraints and
//! one coupled equality constraint, together with the analytic oracles that
//! verify it.
//!
//! The pieces:
//!
//! - [`game`]: black-box cost/constraint evaluators, the exact-penalty
//!   auxiliary cost, and the quadratic specialization with closed-form
//!   gradients.
//! - [`graph`]: undirected communication topology, Laplacian, algebraic
//!   connectivity.
//! - [`seeker`]: the per-agent seeking flow (sinusoidal dither, multiplier
//!   consensus, adaptive amplitude, washout filter) and its averaged model.
//! - [`integrate`]: deterministic fixed-step integration with trajectory
//!   recording.
//! - [`oracle`]: bordered KKT solver, stubborn-player best responses,
//!   frequency/gain condition checks, Lyapunov solve, monotonicity probe.
//! - [`harness`]: JSON experiment configs, presets, metrics, CSV/JSON export,
//!   and parameter sweeps.

pub mod game;
pub mod graph;
pub mod harness;
pub mod integrate;
pub mod oracle;
pub mod seeker;
