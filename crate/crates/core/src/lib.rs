//! Differentially private finite-horizon LQR consensus for single-integrator
//! multi-agent systems.
//!
//! Agents broadcast their states perturbed by Laplace noise whose scale is
//! proportional to their local consensus gap, and steer toward their
//! in-neighbors with the first input of a finite-horizon LQR problem whose
//! state weight is scaled by a decaying sequence `c(t)`. The crate covers
//!
//! - [`graph`]: directed graphs, Laplacians, spanning-tree checks, spectral norms;
//! - [`gain`]: the LQR gain (Riccati recursion and an independent QP oracle),
//!   its sensitivity over feasible weight sets, and the gain table;
//! - [`privacy`]: weight-database adjacency, Laplace sampling, privacy ledger;
//! - [`schedule`]: the `c(t)`, `p(t)` sequences, their constants and validators;
//! - [`sim`]: the synchronous protocol, trial runner and Monte Carlo reduction;
//! - [`bounds`]: `ρ_λ`, the error bound `σ`, the envelope `V̄`.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod bounds;
pub mod gain;
pub mod graph;
pub mod linalg;
pub mod privacy;
pub mod schedule;
mod series;
pub mod sim;

pub use bounds::{BoundsReport, RhoLambda};
pub use gain::{FeasibleWeightSet, GainTable, WeightPair};
pub use graph::DirectedGraph;
pub use linalg::Matrix;
pub use privacy::PrivacyLedger;
pub use schedule::{PowerLawSchedule, Schedule};
pub use series::SeriesBounds;
pub use sim::{MonteCarloSummary, Scenario, SimConfig, SimTrace};
