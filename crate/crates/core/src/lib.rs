//! Models of the detection circuit, damping switch and cyclotron lineshape
//! of a one-electron Penning trap.
//!
//! - [`circuit`]: the resonant tank with its transistor switch, impedance
//!   sweeps and resonance fits.
//! - [`particle`]: electron-circuit coupling, damping rates and axial dynamics.
//! - [`spectra`]: Johnson-noise dip spectra and the shunt-through
//!   transmission measurement.
//! - [`quantum`]: axial quantum statistics and the cyclotron lineshape under
//!   thermal axial jumps.
//! - [`inference`]: fits of measured data back onto the circuit model.
//! - [`cli`]: the `trapdamp` command-line front end.

// `!(x > 0.0)` is how NaN inputs get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod circuit;
pub mod cli;
pub mod config;
pub mod constants;
pub mod error;
pub mod inference;
pub mod io;
pub mod lorentzian;
pub mod optimize;
pub mod particle;
pub mod quantum;
pub mod spectra;

pub use circuit::{CircuitParams, HemtModel, ImpedanceModel, SwitchState};
pub use config::RunConfig;
pub use error::{Error, Result};
