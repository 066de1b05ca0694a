//! Orthogonal approximate message passing for spatially coupled linear
//! measurements.
//!
//! The crate is `no_std` with `alloc`. It covers the sensing-spectrum
//! transforms, the coupled measurement model, finite-size OAMP and
//! long-memory OAMP, their state-evolution recursions, the potential
//! function with its thresholds, and a spatially coupled AMP baseline.

#![no_std]
// `!(x > 0.0)` style guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Section loops index several parallel per-section vectors.
#![allow(clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod amp;
pub mod coupling;
pub mod denoiser;
mod error;
pub mod lmoamp;
pub mod oamp;
pub mod potential;
pub mod quad;
pub mod se;
pub mod spectra;

pub use error::{Error, Result};
