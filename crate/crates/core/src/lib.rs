//! Multilevel Monte Carlo for the wave equation with random coefficients.
//!
//! The crate couples P1 finite elements with mass lumping, leapfrog and
//! stabilized leapfrog local time-stepping, and an adaptive MLMC driver. The
//! [`cost`] module holds the closed-form work and speed-up models used both
//! for sample allocation and for the analytic sweeps.

pub mod cost;
pub mod error;
pub mod fem;
pub mod integrators;
pub mod mesh;
pub mod mlmc;
pub mod problems;
pub mod rng;

pub use error::{Error, Result};
