//! Pseudo-spectral Fourier-Galerkin solver and experiment harness for
//! strain-gradient viscoelasticity on the periodic torus.
//!
//! The system evolves a motion y and velocity u = y_t with elastic stress
//! S = DW for a (possibly nonconvex) stored energy W, viscous damping
//! nu Delta u, and a strain-gradient regularization delta grad Delta F,
//! where F = grad y is always derived spectrally so the involution
//! curl F = 0 holds to machine precision. On top of the time stepper sit
//! energy/dissipation diagnostics and parameter-sweep studies for the
//! vanishing-capillarity (delta -> 0) and vanishing-viscosity (nu -> 0)
//! limits, plus a manufactured-solution verification harness.

pub mod config;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod fft;
pub mod field;
pub mod forcing;
pub mod ops;
pub mod reports;
pub mod snapshot;
#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
