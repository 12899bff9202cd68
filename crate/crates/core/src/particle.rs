//! Axial motion of trapped particles coupled to the detection circuit.
//!
//! A particle oscillating between the endcaps induces a current
//! `I = iω (qκ / 2z0) z`. Flowing through the circuit's resistance this
//! current damps the motion at `γ_z = (qκ/2z0)² R / m`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::ImpedanceModel;
use crate::constants::{ELECTRON_MASS, ELEMENTARY_CHARGE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParticleEnsemble {
    pub n: u32,
    pub charge: f64,
    pub mass: f64,
}

impl ParticleEnsemble {
    pub fn new(n: u32, charge: f64, mass: f64) -> Result<Self> {
        let e = ParticleEnsemble { n, charge, mass };
        e.validate()?;
        Ok(e)
    }

    /// `n` electrons. The sign of the charge is irrelevant to every quantity here.
    pub fn electrons(n: u32) -> Self {
        ParticleEnsemble { n, charge: -ELEMENTARY_CHARGE, mass: ELECTRON_MASS }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("ensemble needs at least one particle"));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::invalid("particle mass must be positive"));
        }
        if self.charge == 0.0 || !self.charge.is_finite() {
            return Err(Error::invalid("particle charge must be nonzero"));
        }
        Ok(())
    }

    /// Returns the same ensemble with `n` particles.
    pub fn with_count(&self, n: u32) -> Self {
        ParticleEnsemble { n, ..*self }
    }
}

impl Default for ParticleEnsemble {
    fn default() -> Self {
        ParticleEnsemble::electrons(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrapGeometry {
    pub z0: f64,
    /// Fraction of the induced charge that reaches the detection electrode.
    pub kappa: f64,
}

impl Default for TrapGeometry {
    fn default() -> Self {
        TrapGeometry { z0: 3.5e-3, kappa: 0.8 }
    }
}

impl TrapGeometry {
    pub fn new(z0: f64, kappa: f64) -> Result<Self> {
        let g = TrapGeometry { z0, kappa };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z0 > 0.0 && self.z0.is_finite()) {
            return Err(Error::invalid("z0 must be positive"));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::invalid("kappa must lie in (0, 1]"));
        }
        Ok(())
    }

    /// `|q| κ / (2 z0)`, the current per unit velocity, in C/m.
    pub fn coupling(&self, charge: f64) -> f64 {
        charge.abs() * self.kappa / (2.0 * self.z0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxialMode {
    pub f_z: f64,
    /// Energy damping rate, rad/s.
    pub gamma_z: f64,
}

impl AxialMode {
    pub fn new(f_z: f64, gamma_z: f64) -> Result<Self> {
        if !(f_z > 0.0 && f_z.is_finite()) {
            return Err(Error::invalid("axial frequency must be positive"));
        }
        if !(gamma_z >= 0.0 && gamma_z.is_finite()) {
            return Err(Error::invalid("damping rate must be non-negative"));
        }
        Ok(AxialMode { f_z, gamma_z })
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.f_z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveForce {
    /// Peak force, N.
    pub amplitude: f64,
    pub frequency: f64,
}

impl DriveForce {
    pub fn new(amplitude: f64, frequency: f64) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::invalid("drive amplitude must be non-negative"));
        }
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(Error::invalid("drive frequency must be positive"));
        }
        Ok(DriveForce { amplitude, frequency })
    }
}

/// Complex amplitude of the current induced in the detection electrode by
/// the center-of-mass motion `z_amplitude` at frequency `f`.
pub fn induced_current(
    geom: &TrapGeometry,
    ens: &ParticleEnsemble,
    z_amplitude: Complex64,
    f: f64,
) -> Result<Complex64> {
    if !(f > 0.0) {
        return Err(Error::invalid("frequency must be positive"));
    }
    geom.validate()?;
    ens.validate()?;
    let omega = 2.0 * PI * f;
    Ok(Complex64::new(0.0, omega) * geom.coupling(ens.charge) * ens.n as f64 * z_amplitude)
}

/// Single-particle energy damping rate through a resistance `r`.
pub fn damping_rate(geom: &TrapGeometry, ens: &ParticleEnsemble, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::invalid("resistance must be non-negative"));
    }
    geom.validate()?;
    ens.validate()?;
    let k = geom.coupling(ens.charge);
    Ok(k * k * r / ens.mass)
}

/// Steady-state complex displacement under a harmonic drive, with the
/// damping term scaled by `Z(ω)/r_ref`. `mode.gamma_z` is the damping rate
/// the particle would have if the circuit were the pure resistance `r_ref`.
pub fn axial_response<Z: ImpedanceModel + ?Sized>(
    mode: &AxialMode,
    ens: &ParticleEnsemble,
    z_of_omega: &Z,
    r_ref: f64,
    drive: &DriveForce,
) -> Result<Complex64> {
    if !(r_ref > 0.0) {
        return Err(Error::invalid("reference resistance must be positive"));
    }
    if !(drive.frequency > 0.0) {
        return Err(Error::invalid("drive frequency must be positive"));
    }
    ens.validate()?;
    let w = 2.0 * PI * drive.frequency;
    let wz = mode.omega();
    let z = z_of_omega.impedance_at(drive.frequency)?;
    let den = Complex64::new(wz * wz - w * w, 0.0) + Complex64::new(0.0, w * mode.gamma_z) * z / r_ref;
    if den.norm() <= f64::EPSILON * (wz * wz) {
        return Err(Error::Singular("undamped drive exactly on resonance".into()));
    }
    Ok(drive.amplitude / ens.mass / den)
}

/// Amplitude envelope of an undriven oscillation after time `t`.
pub fn free_decay(mode: &AxialMode, z_init: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::invalid("time must be non-negative"));
    }
    Ok(z_init * (-0.5 * mode.gamma_z * t).exp())
}

/// Energy envelope of an undriven oscillation after time `t`.
pub fn free_decay_energy(mode: &AxialMode, e_init: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::invalid("time must be non-negative"));
    }
    Ok(e_init * (-mode.gamma_z * t).exp())
}

/// Cycle-averaged power dissipated in the circuit by an oscillation of
/// amplitude `amplitude`. For an ensemble, `mode.gamma_z` is the
/// center-of-mass rate and the mass is the total mass.
pub fn mean_signal_power(mode: &AxialMode, ens: &ParticleEnsemble, amplitude: f64) -> Result<f64> {
    if !(amplitude >= 0.0) {
        return Err(Error::invalid("amplitude must be non-negative"));
    }
    ens.validate()?;
    let w = mode.omega();
    Ok(0.5 * ens.n as f64 * ens.mass * mode.gamma_z * w * w * amplitude * amplitude)
}

/// Series LC that is electrically equivalent to the ensemble's
/// center-of-mass motion, resonant at `f_z`.
pub fn electron_series_lc(geom: &TrapGeometry, ens: &ParticleEnsemble, f_z: f64) -> Result<(f64, f64)> {
    if !(f_z > 0.0) {
        return Err(Error::invalid("axial frequency must be positive"));
    }
    geom.validate()?;
    ens.validate()?;
    let k = geom.coupling(ens.charge);
    let l_e = ens.mass / (k * k) / ens.n as f64;
    let w = 2.0 * PI * f_z;
    Ok((l_e, 1.0 / (l_e * w * w)))
}

/// One sample of a time-domain trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub t: f64,
    pub z: f64,
    pub v: f64,
}

/// Fixed-step fourth-order Runge-Kutta integration of
/// `z'' + γ z' + ω_z² z = (F0/m) cos(ω t)` with a resistive circuit.
///
/// The step is one `steps_per_period`-th of the axial period. Every
/// `sample_every`-th step is recorded, plus the initial point.
#[derive(Debug, Clone, Copy)]
pub struct AxialIntegrator {
    pub mode: AxialMode,
    pub mass: f64,
    pub drive: Option<DriveForce>,
    pub steps_per_period: usize,
}

impl AxialIntegrator {
    pub fn new(mode: AxialMode, mass: f64) -> Self {
        AxialIntegrator { mode, mass, drive: None, steps_per_period: 64 }
    }

    pub fn with_drive(self, drive: DriveForce) -> Self {
        AxialIntegrator { drive: Some(drive), ..self }
    }

    pub fn step_size(&self) -> f64 {
        1.0 / (self.mode.f_z * self.steps_per_period as f64)
    }

    fn accel(&self, t: f64, z: f64, v: f64) -> f64 {
        let w = self.mode.omega();
        let force = self
            .drive
            .map_or(0.0, |d| d.amplitude * (2.0 * PI * d.frequency * t).cos());
        force / self.mass - self.mode.gamma_z * v - w * w * z
    }

    pub fn run(&self, z0: f64, v0: f64, t_end: f64, sample_every: usize) -> Result<Vec<PhasePoint>> {
        if !(t_end >= 0.0) || sample_every == 0 || self.steps_per_period == 0 {
            return Err(Error::invalid("integration needs t_end >= 0 and nonzero step counts"));
        }
        if !(self.mass > 0.0) {
            return Err(Error::invalid("mass must be positive"));
        }
        let h = self.step_size();
        let n_steps = (t_end / h).round() as usize;
        let mut out = Vec::with_capacity(n_steps / sample_every + 1);
        let (mut z, mut v) = (z0, v0);
        out.push(PhasePoint { t: 0.0, z, v });
        for k in 0..n_steps {
            let t = k as f64 * h;
            let (k1z, k1v) = (v, self.accel(t, z, v));
            let (k2z, k2v) = (v + 0.5 * h * k1v, self.accel(t + 0.5 * h, z + 0.5 * h * k1z, v + 0.5 * h * k1v));
            let (k3z, k3v) = (v + 0.5 * h * k2v, self.accel(t + 0.5 * h, z + 0.5 * h * k2z, v + 0.5 * h * k2v));
            let (k4z, k4v) = (v + h * k3v, self.accel(t + h, z + h * k3z, v + h * k3v));
            z += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            if (k + 1) % sample_every == 0 {
                out.push(PhasePoint { t: (k + 1) as f64 * h, z, v });
            }
        }
        Ok(out)
    }
}

/// Oscillation amplitude of a phase-space point, `sqrt(z² + (v/ω)²)`.
pub fn instantaneous_amplitude(p: &PhasePoint, f_z: f64) -> f64 {
    let w = 2.0 * PI * f_z;
    (p.z * p.z + (p.v / w).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Resistive;

    fn electron_geom() -> (TrapGeometry, ParticleEnsemble) {
        (TrapGeometry::default(), ParticleEnsemble::electrons(1))
    }

    #[test]
    fn current_leads_displacement_by_quarter_cycle() {
        let (g, e) = electron_geom();
        assert_eq!(induced_current(&g, &e, Complex64::new(0.0, 0.0), 2e8).unwrap().norm(), 0.0);
        let z = Complex64::from_polar(1e-8, 0.3);
        let i = induced_current(&g, &e, z, 2e8).unwrap();
        let dphi = (i.arg() - z.arg()).rem_euclid(2.0 * PI);
        assert!((dphi - PI / 2.0).abs() < 1e-12);
        let expected = 2.0 * PI * 2e8 * (ELEMENTARY_CHARGE * 0.8 / 7e-3) * 1e-8;
        assert!((i.norm() / expected - 1.0).abs() < 1e-12);
        assert!((i.norm() - 2.301e-16).abs() < 1e-19, "{}", i.norm());
    }

    #[test]
    fn electron_damping_rate() {
        let (g, e) = electron_geom();
        assert_eq!(damping_rate(&g, &e, 0.0).unwrap(), 0.0);
        let g83 = damping_rate(&g, &e, 83e3).unwrap();
        assert!((g83 - 30.5).abs() < 0.1, "{g83}");
        assert!((g83 / (2.0 * PI) - 4.86).abs() < 0.05);
        let g166 = damping_rate(&g, &e, 166e3).unwrap();
        assert!((g166 / g83 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn resonant_steady_state_amplitude() {
        let (g, e) = electron_geom();
        let gamma = damping_rate(&g, &e, 83e3).unwrap();
        let mode = AxialMode::new(200e6, gamma).unwrap();
        let drive = DriveForce::new(1e-20, 200e6).unwrap();
        let z = axial_response(&mode, &e, &Resistive(83e3), 83e3, &drive).unwrap();
        let expected = 1e-20 / (e.mass * gamma * mode.omega());
        assert!((z.norm() / expected - 1.0).abs() < 1e-9);
        assert!((z.arg() + PI / 2.0).abs() < 1e-9);

        let zero = DriveForce::new(0.0, 200e6).unwrap();
        assert_eq!(axial_response(&mode, &e, &Resistive(83e3), 83e3, &zero).unwrap().norm(), 0.0);
    }

    #[test]
    fn undamped_resonance_is_singular() {
        let e = ParticleEnsemble::electrons(1);
        let mode = AxialMode::new(1e6, 10.0).unwrap();
        let drive = DriveForce::new(1.0, 1e6).unwrap();
        let r = axial_response(&mode, &e, &Resistive(0.0), 1.0, &drive);
        assert!(matches!(r, Err(Error::Singular(_))));
    }

    #[test]
    fn free_decay_time_constants() {
        let mode = AxialMode::new(200e6, 30.5).unwrap();
        assert_eq!(free_decay(&mode, 1.0, 0.0).unwrap(), 1.0);
        let a = free_decay(&mode, 1.0, 2.0 / 30.5).unwrap();
        assert!((a - (-1.0f64).exp()).abs() < 1e-15);
        let en = free_decay_energy(&mode, 1.0, 1.0 / 30.5).unwrap();
        assert!((en - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn power_is_cycle_average_of_instantaneous() {
        let e = ParticleEnsemble::electrons(1);
        let mode = AxialMode::new(200e6, 30.5).unwrap();
        let a = 1e-6;
        let p = mean_signal_power(&mode, &e, a).unwrap();
        let w = mode.omega();
        let n = 10_000;
        let avg: f64 = (0..n)
            .map(|k| {
                let t = k as f64 / n as f64 / mode.f_z;
                let v = a * w * (w * t).cos();
                e.mass * mode.gamma_z * v * v
            })
            .sum::<f64>()
            / n as f64;
        assert!((avg / p - 1.0).abs() < 1e-6);
        let doubled = AxialMode { gamma_z: 61.0, ..mode };
        assert!((mean_signal_power(&doubled, &e, a).unwrap() / p - 2.0).abs() < 1e-12);
        assert_eq!(mean_signal_power(&mode, &e, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn series_lc_scaling_and_resonance() {
        let (g, e) = electron_geom();
        let (l1, c1) = electron_series_lc(&g, &e, 200e6).unwrap();
        let (l2, c2) = electron_series_lc(&g, &e.with_count(2), 200e6).unwrap();
        assert!((l1 / l2 - 2.0).abs() < 1e-12);
        assert!((c2 / c1 - 2.0).abs() < 1e-12);
        let f = 1.0 / (2.0 * PI * (l1 * c1).sqrt());
        assert!((f / 200e6 - 1.0).abs() < 1e-12);
        // l_e R relation: gamma = R / l_e
        let gamma = damping_rate(&g, &e, 83e3).unwrap();
        assert!((83e3 / l1 / gamma - 1.0).abs() < 1e-12);
    }

    fn scaled_mode() -> AxialMode {
        // 1 Hz oscillator with gamma/omega ~ 1e-3
        AxialMode::new(1.0, 2.0 * PI * 1e-3).unwrap()
    }

    #[test]
    fn rk4_free_decay_slope() {
        let mode = scaled_mode();
        let integ = AxialIntegrator::new(mode, 1.0);
        let t_end = 5.0 / mode.gamma_z;
        let traj = integ.run(1.0, 0.0, t_end, 64).unwrap();
        let (t0, a0) = (traj[0].t, instantaneous_amplitude(&traj[0], mode.f_z).ln());
        let last = traj.last().unwrap();
        let slope = (instantaneous_amplitude(last, mode.f_z).ln() - a0) / (last.t - t0);
        assert!((slope / (-mode.gamma_z / 2.0) - 1.0).abs() < 0.01, "{slope}");
    }

    #[test]
    fn rk4_driven_steady_state() {
        let mode = scaled_mode();
        let f0 = 1e-3;
        let integ = AxialIntegrator::new(mode, 1.0).with_drive(DriveForce::new(f0, mode.f_z).unwrap());
        let traj = integ.run(0.0, 0.0, 10.0 / mode.gamma_z, 1).unwrap();
        let tail = &traj[traj.len() - 64..];
        let amp = tail.iter().map(|p| p.z.abs()).fold(0.0, f64::max);
        let expected = f0 / (1.0 * mode.gamma_z * mode.omega());
        assert!((amp / expected - 1.0).abs() < 0.01, "{amp} vs {expected}");
    }
}
