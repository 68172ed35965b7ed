//! Shaped ultrafast driving of a two-level emitter.
//!
//! The crate is organised bottom-up:
//!
//! * [`pulseshape`] builds Gaussian pulse spectra with notch and chirp masks
//!   and synthesizes the complex time-domain Rabi frequency by FFT.
//! * [`quantum`] holds the 2x2 operator algebra, the rotating-frame
//!   Hamiltonian, the Lindblad generator and the adiabaticity metric.
//! * [`propagator`] integrates the master equation over a sampled envelope
//!   with an adaptive Dormand-Prince scheme.
//! * [`emission`] computes first-order correlations via the quantum regression
//!   theorem, time-dependent spectra and Lorentzian line fits.
//! * [`sweeps`] maps the final inversion over slices of the
//!   (area, chirp, notch) volume in parallel.
//!
//! All frequencies are angular (rad/s) and all times are in seconds.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod emission;
pub mod error;
pub mod propagator;
pub mod pulseshape;
pub mod quantum;
pub mod sweeps;

pub use error::{Error, Result};

pub use num_complex::Complex64 as C64;

/// Version tag written into provenance blocks.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
