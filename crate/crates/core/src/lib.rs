//! Semiclassical dynamics and squeezing estimators for finite-range dipolar
//! XY interactions on a 2D lattice.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! filesystem, threads or the command line lives in the `dipsq` companion
//! crate; this crate holds the numerics:
//!
//! - [`couplings`]: exact Clebsch-Gordan algebra and dipolar exchange strengths
//!   for magnetically insensitive hyperfine qubits.
//! - [`lattice`]: geometries, clouds, filling profiles and pairwise coupling
//!   matrices.
//! - [`pulses`]: instantaneous global rotation schedules.
//! - [`dtwa`]: discrete truncated Wigner sampling and RK4 integration, plus
//!   the exact [`oat`] (Dicke basis) and [`ed`] (state vector) oracles.
//! - [`itinerancy`]: Metropolis hopping and the all-to-all coupling limit.
//! - [`observables`]: synthetic shots, contrast, noise squeezing, Wineland
//!   parameter, minimum fits and windowed spin correlations.

#![no_std]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::too_many_arguments)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod couplings;
pub mod dtwa;
pub mod ed;
mod error;
pub mod itinerancy;
pub mod lattice;
pub(crate) mod math;
pub mod oat;
pub mod observables;
pub mod pulses;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
