//! Joint subcarrier assignment and wave-domain zero-forcing for a stacked
//! intelligent metasurface (SIM) serving a wideband OFDMA downlink.
//!
//! The crate is `no_std` and only needs an allocator. It covers:
//!
//! * [`channel`]: scatterer-based frequency-selective channels `G_i`.
//! * [`stack`]: Rayleigh-Sommerfeld inter-layer propagation and the phase
//!   cascade `P_i`.
//! * [`allocation`]: the binary assignment matrix `Z`, its exact 0-1 program
//!   and the random/greedy baselines.
//! * [`phase`]: per-layer quadratic forms, coordinate descent, the penalty
//!   convex-concave procedure and the closed-form scaling factor.
//! * [`joint`]: alternating optimization over `Z`, phases and scaling.
//! * [`metrics`]: NMSE, water-filling, sum rate, Monte-Carlo BPSK BER and the
//!   digital zero-forcing baseline.
//!
//! IO, configuration files and the experiment runner live in the companion
//! `sim-ofdma` crate.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod allocation;
pub mod channel;
pub mod config;
mod error;
pub mod joint;
pub mod linalg;
pub mod metrics;
pub mod phase;
pub mod rng;
pub mod stack;

pub use error::{Error, Result};
pub use linalg::CMatrix;
pub use nalgebra;
pub use num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
