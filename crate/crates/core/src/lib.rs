//! Transmission/reflection sub-process model of one-dimensional completed
//! scattering off symmetric barriers.
//!
//! Units: `hbar = m = 1`, `E = k^2 / 2`. Incidence is from the left.

// `!(a < b)` is used deliberately so NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifact;
pub mod cli;
pub mod config;
pub mod decomposition;
pub mod error;
pub mod larmor_clock;
pub mod oracle;
pub mod potentials;
pub mod quadrature;
pub mod stationary;
pub mod times;
pub mod wavepacket;

pub use error::{Error, Result};
pub use num_complex::Complex64;
