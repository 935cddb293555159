//! Particle-based simulator and verification harness for kinetic plasma
//! transport with structured electrostatic noise on the unit 3-torus.
//!
//! The crate is organized around six subsystems:
//!
//! - [`torus_kernel`]: the periodic Coulomb kernel, its spectral
//!   regularization, density deposition and self-consistent field evaluation;
//! - [`noise_model`]: construction, analytics and sampling of gradient-type
//!   Gaussian velocity noise (a canonical Fourier family, a blob family and a
//!   piecewise-constant renewal field);
//! - [`particle_sde`]: time integration of the characteristics under common
//!   (shared-field) or independent (per-particle) noise;
//! - [`diagnostics`]: energy ledgers, martingale bounds, observables and
//!   kinetic interpolation inequalities;
//! - [`scaling_experiment`]: the sweep comparing common-noise ensembles
//!   against the independent-noise limit solver as the noise decorrelates;
//! - [`cli_io`]: configuration, reproducible execution and persistence.
//!
//! All randomness flows through counter-based streams keyed by
//! `(master seed, replica, step, purpose)`, so every run is bit-reproducible
//! regardless of thread scheduling.

pub mod cli_io;
pub mod diagnostics;
pub mod geometry;
pub mod noise_model;
pub mod numerics;
pub mod particle_sde;
pub mod rng;
pub mod scaling_experiment;
pub mod torus_kernel;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
