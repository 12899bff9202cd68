//! Physical constants (CODATA 2018 exact / recommended values, SI units).

use std::f64::consts::PI;

/// Planck constant, J s (exact).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Boltzmann constant, J/K (exact).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Elementary charge, C (exact).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Electron mass, kg.
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
