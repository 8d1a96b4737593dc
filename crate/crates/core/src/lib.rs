//! Robust control of inhomogeneously broadened two-level spin ensembles.
//!
//! The crate is organised bottom-up:
//!
//! * [`spin`] simulates a driven two-level spin in the rotating frame under a
//!   detuning `δ` and an amplitude drift `κ`, and averages state or gate
//!   fidelities over a weighted `(δ, κ)` lattice.
//! * [`surrogate`] fits a constant-mean Kriging predictor of the single-point
//!   fidelity `f(δ, κ)` from a handful of samples.
//! * [`optimizer`] runs the hybrid search: sample, fit, validate, search the
//!   phase-modulated pulse parameters on the surrogate, verify on the dense
//!   lattice. Plain Fourier-basis and true-objective baselines live here too.
//! * [`magnetometry`] simulates XY-8 AC magnetometry with rectangular or
//!   shaped pulses and extracts the coherence time.
//!
//! All physical quantities are SI: angular frequencies in rad/s, times in s.

pub mod error;
pub mod magnetometry;
pub mod optimizer;
pub mod spin;
pub mod surrogate;
pub mod units;

pub use error::{Error, Result};
