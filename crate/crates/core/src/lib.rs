//! Mean-field simulation of coherently driven two-level atoms coupled through
//! the vacuum electromagnetic field.
//!
//! Units are fixed throughout the crate: lengths in units of the transition
//! wavelength λ0 (so the wavenumber is `2π`), rates in units of the
//! single-atom decay rate γ0, and time as the dimensionless γ0·t.
//!
//! The pipeline runs bottom-up:
//!
//! * [`geometry`] builds chains, square lattices and rings.
//! * [`couplings`] turns positions into coherent (J) and dissipative (Γ)
//!   coupling matrices, and sums them to the infinite-lattice limit.
//! * [`meanfield`] holds the equations of motion for the full N-atom model and
//!   the permutationally symmetric three-variable model.
//! * [`integrator`] is the adaptive Dormand–Prince 5(4) solver.
//! * [`equilibria`] finds and classifies fixed points of the symmetric model.
//! * [`chaos`] measures divergence of nearby trajectories on the attractor.
//! * [`sweep`] scans parameter planes and curves.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chaos;
pub mod couplings;
pub mod equilibria;
pub mod error;
pub mod fmt;
pub mod geometry;
pub mod integrator;
pub mod meanfield;
pub mod poly;
pub mod sweep;

pub use error::{Error, Result};

/// Wavenumber of the atomic transition in units of 1/λ0.
pub const WAVENUMBER: f64 = 2.0 * std::f64::consts::PI;
