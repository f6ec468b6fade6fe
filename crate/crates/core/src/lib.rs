//! Online particle smoothing of additive functionals under Feynman–Kac path
//! models whose transition densities may only be available through (possibly
//! biased) nonnegative estimates.
//!
//! The crate is organised around the two sampling operations of the PaRIS
//! smoother:
//!
//! - [`forward`]: auxiliary-particle-filter forward sampling, either with an
//!   exact transition density or with a pseudo-marginal estimate;
//! - [`backward`]: backward sampling of ancestor indices (rejection or
//!   independent Metropolis–Hastings) and the update of the per-particle
//!   statistics `tau`.
//!
//! [`driver`] chains them into an online recursion, [`estimators`] contains
//! concrete transition-density estimators (exact wrapper, Durham–Gallant,
//! ABC kernel) and [`oracles`] holds exact reference computations (Kalman/RTS,
//! finite-state forward smoothing) used to validate the particle output.
//!
//! All numerical code is generic over a [`Scalar`] (`f32` or `f64`); the
//! `*64`/`*32` aliases at the crate root fix the common choices.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backward;
pub mod driver;
pub mod error;
pub mod estimators;
pub mod forward;
pub mod model;
pub mod oracles;
pub mod samplers;
mod scalar;

pub use backward::{BackwardConfig, BackwardDraw, BackwardSampler};
pub use driver::{DensityMode, EstimateRecord, ParisConfig};
pub use error::{Error, Result};
pub use forward::ForwardOutcome;
pub use model::{ModelSpec, ModelStep, ParticleCloud, PathModel, StepSpec, TransitionEstimator};
pub use samplers::{RngStream, StreamRng};
pub use scalar::Scalar;

/// Particle cloud in double precision.
pub type ParticleCloud64 = ParticleCloud<f64>;
/// Particle cloud in single precision.
pub type ParticleCloud32 = ParticleCloud<f32>;
/// Online estimate record in double precision.
pub type EstimateRecord64 = EstimateRecord<f64>;
/// Linear-Gaussian model description in double precision.
pub type LgssSpec64 = oracles::LgssSpec<f64>;
/// Finite-state model in double precision.
pub type FiniteHmm64 = oracles::FiniteHmm<f64>;
