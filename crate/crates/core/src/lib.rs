//! Directed coherent transport from Bloch oscillations on two-dimensional lattices.
//!
//! The crate is organised bottom-up:
//!
//! - [`lattice`]: the single-band tight-binding model (`HoppingSet`), wave vectors, forces,
//!   dispersion and group velocity.
//! - [`band`]: plane-wave band structure of the three-beam triangular optical lattice and
//!   extraction of hoppings from the sampled lowest band.
//! - [`semiclassics`]: Bloch period, closed-form centre-of-mass displacement, drift vector per
//!   period and rational approximation of force directions.
//! - [`evolution`]: exact quantum dynamics on a finite grid (RK4 in real space) and the
//!   acceleration-gauge spectral propagator used to cross-check it.
//! - [`analysis`]: post-processing of trajectories (period-averaged velocities, oscillation
//!   period, deviations).
//!
//! Units: ħ = 1, energies in recoil units, sites labelled by integer offsets.

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod band;
pub mod error;
pub mod evolution;
pub mod lattice;
pub mod semiclassics;

pub use error::{Error, Result};
pub use lattice::{ForceSpec, HoppingSet, Offset, WaveVector};
