//! Planning library for max-min over-the-air computation task counts in
//! multi-UAV, multi-cluster networks.
//!
//! The outer loop bisects on the per-cluster task count `D`. For each probe a
//! block-coordinate descent alternates between scheduling, transmit power,
//! receive normalizers and UAV trajectories, and the probe is accepted when
//! the worst MSE-to-target ratio `Γ` is at most one.

// NaN-rejecting `!(x > 0.0)` checks and index loops over several arrays
// are intentional in the numeric code.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod benchmarks;
pub mod channel;
pub mod convex;
pub mod experiment;
pub mod normalizing;
pub mod orchestrator;
pub mod power;
pub mod scenario;
pub mod scheduling;
pub mod trajectory;
pub mod verify;

pub use benchmarks::{run_scheme, upper_bound, SchemeId};
pub use orchestrator::{bisection_solve, BcdOptions, Pipeline, SolveOutcome};
pub use scenario::Scenario;
