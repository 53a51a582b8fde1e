//! Critical bond percolation on the square lattice.
//!
//! Everything here is deterministic given `(seed, replica)`: configurations
//! are sampled with a counter-based generator keyed per edge, so replicas can
//! be farmed out to workers in any order and re-derived bit for bit.
//!
//! The crate is `no_std` + `alloc`; IO, the CLI, and file formats live in the
//! companion `perc-lab` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod arms;
pub mod clusters;
pub mod error;
pub mod incipient;
pub mod lattice;
pub mod martingale;
pub mod scaling;

pub use error::PercError;

/// Critical probability for bond percolation on the square lattice.
pub const P_CRITICAL: f64 = 0.5;

/// One-arm exponent 5/48.
pub const ONE_ARM_EXPONENT: (i64, i64) = (5, 48);
/// Mean incipient-volume exponent 91/48.
pub const MEAN_T_EXPONENT: (i64, i64) = (91, 48);
/// Variance exponent 91/24.
pub const VARIANCE_EXPONENT: (i64, i64) = (91, 24);

/// Exponent (k^2 - 1)/12 for the k-arm annulus event, k >= 2.
pub fn k_arm_exponent(k: i64) -> (i64, i64) {
    (k * k - 1, 12)
}
