//! mvlab: a numerical laboratory for distribution-dependent SDEs with phase
//! transitions.
//!
//! The library computes stationary distributions of mean-field models whose
//! drift depends on the law through a scalar statistic, discretises the
//! linearised generator (frozen generator plus a rank-one nonlocal term) in
//! an orthonormal polynomial basis to read off spectral stability, evolves
//! the associated linear semigroup, and cross-checks every prediction with
//! interacting-particle simulation.
//!
//! Module map:
//! - [`model`] — the model catalog (drift, statistic, linearisation kernel).
//! - [`measure`] — quadrature-grid measures: Gibbs densities, quantiles, sampling.
//! - [`selfconsistency`] — fixed points of the mean statistic and the phase diagram.
//! - [`galerkin`] — orthonormal-basis discretisation and spectra.
//! - [`semigroup`] — semigroup evolution, perturbation-identity and decay checks.
//! - [`particle`] — interacting-particle runs, Wasserstein tracking, gradient estimator.
//! - [`metrics`] — the admissible modulus/weight class for distances.
//! - [`cli`] — experiment orchestration and serialization.

pub mod cli;
pub mod error;
pub mod galerkin;
pub mod linalg;
pub mod measure;
pub mod metrics;
pub mod model;
pub mod particle;
pub mod rng;
pub mod selfconsistency;
pub mod semigroup;

pub use error::{Error, Result};
