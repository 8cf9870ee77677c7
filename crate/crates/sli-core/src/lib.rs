//! Simulation and analysis toolkit for shaken-lattice atom interferometry.
//!
//! An atom condensate sits in the ground Bloch state of a 1D optical lattice
//! whose standing-wave phase can be modulated ("shaken"). Shaking drives
//! transitions between momentum states separated by `2ħk_L`; learned shaking
//! waveforms implement beamsplitter, propagation, and recombination
//! operations, and the assembled sequence acts as an inertial sensor.
//!
//! The crate is organized around that workflow:
//!
//! - [`lattice`] — plane-wave Hamiltonian, ground Bloch state, and
//!   time-dependent propagation under a shaking phase and an applied
//!   acceleration.
//! - [`protocol`] — enveloped Fourier waveform segments and their assembly
//!   into full interferometer sequences.
//! - [`optimizer`] — the population-overlap error functional, a Nelder-Mead
//!   simplex engine, and dCRAB super-iterations with randomized frequency
//!   bases.
//! - [`sensing`] — acceleration response, classical Fisher information and
//!   the Cramér-Rao minimum detectable acceleration, measurement noise, and
//!   acceleration scans.
//! - [`fitting`] — Levenberg-Marquardt least squares and the sensitivity
//!   scaling-law fit.
//!
//! Everything here is pure computation over owned values; the crate is
//! `no_std`-compatible (with `alloc`) and all I/O lives in the companion CLI
//! crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod constants;
pub mod fitting;
pub mod lattice;
pub mod linalg;
pub mod optimizer;
pub mod protocol;
pub mod sensing;
