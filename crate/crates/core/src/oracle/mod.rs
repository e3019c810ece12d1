//! Independent reference solvers: Numerov for stationary amplitudes and a
//! Crank-Nicolson propagator for packets.

pub mod crank_nicolson;
pub mod numerov;

pub use crank_nicolson::{
    l2_distance, propagate_extrapolated, propagate_richardson, CrankNicolson, GridSpec, Trajectory,
};
pub use numerov::{numerov_amplitudes, numerov_solve, NumerovAmplitudes, NumerovSolution};
