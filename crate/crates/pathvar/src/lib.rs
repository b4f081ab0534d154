//! Path-dependent high-frequency statistics for Ito semimartingales.
//!
//! The crate simulates Ito semimartingale paths (drift + stochastic
//! volatility + compound-Poisson jumps) on a nested coarse/fine time grid,
//! computes block statistics built from the rescaled incremental process
//! (path-functional sums, bipower variance, realized ranges, local-average
//! quadratic variation), evaluates the constants appearing in their limit
//! theory, simulates the limit laws themselves, and runs Monte Carlo
//! convergence experiments tying the two sides together.
//!
//! Modules:
//!
//! * [`rng`] - counter-based splittable seed streams (reproducible parallel MC)
//! * [`model`] - grids, model specifications, the Euler path simulator
//! * [`functional`] - path functionals on normalized segments and their derivatives
//! * [`estimator`] - statistics computed from a simulated path
//! * [`asymptotics`] - limit constants (rho, lambda, Lambda) and limit-law simulators
//! * [`experiment`] - Monte Carlo studies (LLN decay, CLT coverage, rates, jump limits)
//! * [`stats`] - KS distances, OLS, deterministic summation helpers

pub mod asymptotics;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod functional;
pub mod model;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
