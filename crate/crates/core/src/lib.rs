//! Regression-free tensor-network integration.
//!
//! The crate builds tensor-train cross (TT-X) interpolants of arbitrary
//! multivariate functions and integrates them one dimension at a time, builds
//! a Fourier tensor train for the arithmetic basket call payoff, accelerates
//! deterministic estimate sequences with Aitken extrapolation, and provides a
//! seeded Monte Carlo baseline for comparison.
//!
//! Module map:
//! - [`numcore`]: dense linear algebra, special functions, 1-D quadrature, RNG
//! - [`gaussmodel`]: multivariate Gaussian density, conditioning and sampling
//! - [`ttcross`]: TT-X construction, evaluation, greedy growth, integration
//! - [`accel`]: Aitken extrapolation
//! - [`fouriertt`]: Fourier tensor train of the basket payoff
//! - [`montecarlo`]: plain Monte Carlo estimator
//! - [`basket`]: the basket-option integration problem
//! - [`experiment`]: convergence sweeps, slope fits, CSV and report output

pub mod accel;
pub mod basket;
pub mod error;
pub mod experiment;
pub mod fouriertt;
pub mod gaussmodel;
pub mod montecarlo;
pub mod numcore;
pub mod ttcross;

pub use error::{Error, Result};
