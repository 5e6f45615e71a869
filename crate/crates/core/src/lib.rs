//! Resilient distributed optimization with learned trust.
//!
//! Legitimate agents minimize the average of local strongly convex objectives
//! over a box while malicious neighbors inject arbitrary values. Each agent
//! accumulates stochastic trust observations per neighbor, keeps only
//! neighbors with nonnegative accumulated trust, and runs a projected
//! gradient step on the trust-weighted average. The crate simulates this
//! protocol, a malicious-free reference dynamic and the W-MSR baseline, and
//! evaluates closed-form convergence bounds for comparison with Monte Carlo
//! estimates.
//!
//! ```
//! use resilient_opt::dynamics::{run_simulation, Algorithm, RunOptions};
//! use resilient_opt::harness::ExperimentConfig;
//!
//! let mut cfg = ExperimentConfig::consensus_preset(10).unwrap();
//! cfg.run.horizon = 50;
//! let trace = run_simulation(&cfg.run, Algorithm::Resilient, 1, &RunOptions::default()).unwrap();
//! assert_eq!(trace.states.len(), 51);
//! ```

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod network;
pub mod par;
pub mod problem;
pub mod trust;
pub mod vecops;
