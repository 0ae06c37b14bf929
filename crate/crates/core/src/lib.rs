//! Simulation and inference for the stochastic wave equation in one space
//! dimension driven by Gaussian noise that is fractional in time and white in
//! space.
//!
//! - [`kernels`]: closed-form covariances of the solution and its increments.
//! - [`sampler`]: exact Gaussian sampling and quadratic-form oracles.
//! - [`variations`]: quadratic-variation statistics.
//! - [`estimators`]: Hurst index and drift estimators with plug-in intervals.
//! - [`asymptotics`]: limit constants and limiting-law descriptors.
//! - [`montecarlo`]: reproducible replication harness and diagnostics.

pub mod asymptotics;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod kernels;
pub mod montecarlo;
pub mod sampler;
pub mod variations;

pub use error::{Error, Result};
pub use exec::{CancelToken, Exec};
pub use kernels::{HurstParam, PhysicalParams, RectGrid, Regime, SpaceTimePoint};
