//! Numerical laboratory for linear centroid meta-learning.
//!
//! A biased ridge inner solver adapts a shared centroid `w0` to each task.
//! The outer loop fits `w0` by empirical risk minimization over many tasks,
//! either on a train/validation split of each task (`sp`) or on all of the
//! task data at once (`trtr`). This crate provides:
//!
//! * [`numerics`]: counter-based RNG streams and the dense linear algebra the
//!   rest of the crate needs.
//! * [`tasks`]: the realizable Gaussian linear model and the one-dimensional
//!   two-point counterexample distribution.
//! * [`solvers`]: the inner solver, both outer losses as exact quadratic forms,
//!   streaming ERM, and the plug-in sandwich covariance.
//! * [`asymptotics`]: finite-`(n, d)` Wishart Monte-Carlo rates, the
//!   Marchenko-Pastur Stieltjes transform and proportional-limit rates.
//! * [`oracles`]: exact enumeration of the counterexample minimizers and
//!   Gaussian quadratic-form moments.
//! * [`harness`]: experiment runners, configuration, CSV and SVG output.

pub mod asymptotics;
mod error;
pub mod harness;
pub mod numerics;
pub mod oracles;
pub mod solvers;
pub mod tasks;

pub use error::{Error, Result};
pub use numerics::{Matrix, Rng, Vector};
