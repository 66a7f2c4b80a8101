//! A numerical laboratory for stochastic gradient Langevin dynamics:
//! hitting times to first/second-order stationary points, saddle-point
//! escape against the Ornstein-Uhlenbeck reference dynamics, ergodicity
//! contrasts with perturbed gradient descent, and validators for the
//! matrix-product inequalities and constant chains the prescriptions rest on.
//!
//! The crate is organized around the experiment pipeline:
//!
//! - [`schedule`]: power-law step sizes and their cumulative masses;
//! - [`problems`]: the objective suite (linear regression, matrix
//!   factorization, online PCA, quadratic saddles) with stochastic
//!   gradient samplers;
//! - [`dynamics`]: the SGLD/SGD/ULA/PGD steppers and trajectory runner;
//! - [`stationarity`]: FOSP/SOSP membership and hitting-time measurement;
//! - [`theory`]: closed-form prescriptions and numerical validators;
//! - [`constants`]: analytic vs empirical assumption constants;
//! - [`harness`]: experiment orchestration, configs, and reports.

pub mod constants;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod problems;
pub mod rng;
pub mod schedule;
pub mod stationarity;
pub mod theory;

pub use error::{Error, Result};
