//! Trajectory-ensemble simulation of non-Hermitian quantum dynamics for a
//! two-spin chain embedded in a bath of two harmonic oscillators.
//!
//! The pipeline is: [`sampler`] draws bath phase-space points from the thermal
//! Wigner distribution, [`propagator`] carries each adiabatic density-matrix
//! element along its own classical trajectory while accumulating phase and
//! decay, and [`observables`] averages the back-rotated matrices into the
//! reduced density matrix of the spins. [`oracle`] holds independent dense
//! integrators and closed-form laws used for validation.

pub mod adiabatic;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod propagator;
pub mod sampler;

pub use error::{Error, Result};
