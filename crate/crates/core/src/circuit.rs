//! Two-terminal impedance of the switchable detection tank.
//!
//! Topology, endcap node `T` to ground:
//!
//! ```text
//!   T ──┬── C_trap ── gnd
//!       ├── R_loss ── gnd
//!       └── L1 ── M ──┬── L2 ── gnd
//!                     ├── C_amp ── gnd
//!                     └── C_tuning ── (R_ds ∥ C_ds) ── gnd     (switch)
//! ```
//!
//! `R_ds` is the HEMT drain-source resistance, `r_off` or `r_on` depending on
//! the gate bias. The network is small enough to reduce in closed form.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lorentzian::fit_lorentzian_points;

pub type ComplexImpedance = Complex64;

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Drain-source model of the switch transistor: a resistance that depends on
/// the gate bias, shunted by a fixed capacitance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HemtModel {
    pub r_off: f64,
    pub r_on: f64,
    pub c_ds: f64,
}

impl Default for HemtModel {
    fn default() -> Self {
        HemtModel::FITTED
    }
}

impl HemtModel {
    /// Best-fit switch parameters from the tuning-capacitor optimization.
    pub const FITTED: HemtModel = HemtModel { r_off: 65e3, r_on: 9.6, c_ds: 1.8e-12 };

    pub fn new(r_off: f64, r_on: f64, c_ds: f64) -> Result<Self> {
        let h = HemtModel { r_off, r_on, c_ds };
        h.validate()?;
        if r_off <= r_on {
            return Err(Error::invalid(format!("r_off ({r_off}) must exceed r_on ({r_on})")));
        }
        Ok(h)
    }

    /// Checks positivity and finiteness. `r_off == r_on` is accepted (a switch
    /// with no effect) so that degenerate comparisons can be built.
    pub fn validate(&self) -> Result<()> {
        let ok = self.r_on.is_finite()
            && self.r_off.is_finite()
            && self.c_ds.is_finite()
            && self.r_on > 0.0
            && self.r_off >= self.r_on
            && self.c_ds >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("HEMT model out of range: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchState {
    Off,
    On,
}

impl SwitchState {
    pub fn resistance(self, hemt: &HemtModel) -> f64 {
        match self {
            SwitchState::Off => hemt.r_off,
            SwitchState::On => hemt.r_on,
        }
    }
}

impl std::str::FromStr for SwitchState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(SwitchState::Off),
            "on" => Ok(SwitchState::On),
            other => Err(Error::invalid(format!("switch state must be `on` or `off`, got `{other}`"))),
        }
    }
}

/// Component values of the tank and switch. SI units throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub c_trap: f64,
    pub l1: f64,
    pub l2: f64,
    /// Parallel loss across the tank at the endcap node.
    pub r_loss: f64,
    /// Amplifier input capacitance at the tap.
    pub c_amp: f64,
    /// Series capacitor of the switch branch; zero removes the branch.
    pub c_tuning: f64,
    pub hemt: HemtModel,
}

/// Off-state peak resistance the default parameters are calibrated to.
pub const DEFAULT_PEAK_RESISTANCE: f64 = 83e3;

impl Default for CircuitParams {
    /// 8.2 pF trap, 55 nH + 15 nH tapped inductor, fitted HEMT, 22 pF tuning
    /// capacitor, with `r_loss` solved so the off-state peak is 83 kΩ.
    fn default() -> Self {
        CircuitParams {
            c_trap: 8.2e-12,
            l1: 55e-9,
            l2: 15e-9,
            r_loss: DEFAULT_PEAK_RESISTANCE,
            c_amp: 0.0,
            c_tuning: 22e-12,
            hemt: HemtModel::FITTED,
        }
        .with_peak_resistance(DEFAULT_PEAK_RESISTANCE)
        .expect("default circuit has a well-defined off-state resonance")
    }
}

impl CircuitParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.c_trap, self.l1, self.l2, self.r_loss, self.c_amp, self.c_tuning]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("circuit parameters must be finite"));
        }
        if self.c_trap < 0.0 || self.c_amp < 0.0 || self.c_tuning < 0.0 {
            return Err(Error::invalid("capacitances must be non-negative"));
        }
        if !(self.l1 > 0.0 && self.l2 > 0.0) {
            return Err(Error::invalid("l1 and l2 must be positive"));
        }
        if !(self.r_loss > 0.0) {
            return Err(Error::invalid("r_loss must be positive"));
        }
        self.hemt.validate()
    }

    pub fn l_total(&self) -> f64 {
        self.l1 + self.l2
    }

    /// Admittance from the tap node `M` to ground.
    fn tap_admittance(&self, state: SwitchState, omega: f64) -> Complex64 {
        let mut y = 1.0 / (J * omega * self.l2) + J * omega * self.c_amp;
        if self.c_tuning > 0.0 {
            let y_ds = Complex64::new(1.0 / state.resistance(&self.hemt), omega * self.hemt.c_ds);
            let y_c = J * omega * self.c_tuning;
            y += y_c * y_ds / (y_c + y_ds);
        }
        y
    }

    /// Admittance of the inductor path (L1 into node M) seen from the endcap.
    fn inductor_path_admittance(&self, state: SwitchState, omega: f64) -> Complex64 {
        let y_m = self.tap_admittance(state, omega);
        y_m / (1.0 + J * omega * self.l1 * y_m)
    }

    /// Total admittance endcap to ground.
    pub fn admittance(&self, state: SwitchState, f: f64) -> Complex64 {
        let omega = 2.0 * PI * f;
        J * omega * self.c_trap + 1.0 / self.r_loss + self.inductor_path_admittance(state, omega)
    }

    /// Frequency of the off-state parallel resonance (Im Y = 0), located by a
    /// scan around the bare LC frequency followed by bisection.
    pub fn off_state_resonance(&self) -> Result<f64> {
        self.validate()?;
        let c = self.c_trap.max(1e-18);
        let f_lc = 1.0 / (2.0 * PI * (self.l_total() * c).sqrt());
        let b = |f: f64| self.admittance(SwitchState::Off, f).im;
        let (lo, hi) = (0.3 * f_lc, 3.0 * f_lc);
        let n = 600;
        let mut prev_f = lo;
        let mut prev_b = b(lo);
        for i in 1..=n {
            let f = lo * (hi / lo).powf(i as f64 / n as f64);
            let bf = b(f);
            if prev_b < 0.0 && bf >= 0.0 {
                let (mut a, mut z) = (prev_f, f);
                for _ in 0..200 {
                    let mid = 0.5 * (a + z);
                    if b(mid) < 0.0 {
                        a = mid;
                    } else {
                        z = mid;
                    }
                    if z - a <= 1e-15 * z {
                        break;
                    }
                }
                return Ok(0.5 * (a + z));
            }
            prev_f = f;
            prev_b = bf;
        }
        Err(Error::Domain("no off-state parallel resonance near the LC frequency".into()))
    }

    /// Copy with `r_loss` chosen so that Re[Z] at the off-state resonance
    /// equals `r_peak`.
    pub fn with_peak_resistance(&self, r_peak: f64) -> Result<Self> {
        if !(r_peak > 0.0) {
            return Err(Error::invalid("target peak resistance must be positive"));
        }
        let f_r = self.off_state_resonance()?;
        let g_rest = self.inductor_path_admittance(SwitchState::Off, 2.0 * PI * f_r).re;
        let g_loss = 1.0 / r_peak - g_rest;
        if !(g_loss > 0.0) {
            return Err(Error::invalid(format!(
                "switch losses alone already pull the peak below {r_peak} Ω"
            )));
        }
        Ok(CircuitParams { r_loss: 1.0 / g_loss, ..*self })
    }

    /// Copy with `c_trap` adjusted so the off-state resonance sits exactly at
    /// `f_z`, the way the tank is trimmed to the particle's axial frequency.
    pub fn tuned_to(&self, f_z: f64) -> Result<Self> {
        if !(f_z > 0.0) {
            return Err(Error::invalid("tuning frequency must be positive"));
        }
        self.validate()?;
        let omega = 2.0 * PI * f_z;
        let c_trap = -self.inductor_path_admittance(SwitchState::Off, omega).im / omega;
        if !(c_trap > 0.0) || !c_trap.is_finite() {
            return Err(Error::Domain(format!(
                "inductor path is capacitive at {f_z} Hz; cannot tune with c_trap"
            )));
        }
        Ok(CircuitParams { c_trap, ..*self })
    }

    /// Bind a switch state, giving something that can be evaluated as an impedance.
    pub fn at(&self, state: SwitchState) -> Tank {
        Tank { params: *self, state }
    }
}

/// Anything that presents a frequency-dependent impedance to the particle.
pub trait ImpedanceModel {
    fn impedance_at(&self, f: f64) -> Result<ComplexImpedance>;
}

/// Circuit parameters with the switch state fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tank {
    pub params: CircuitParams,
    pub state: SwitchState,
}

impl ImpedanceModel for Tank {
    fn impedance_at(&self, f: f64) -> Result<ComplexImpedance> {
        impedance(&self.params, self.state, f)
    }
}

/// Frequency-independent real impedance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resistive(pub f64);

impl ImpedanceModel for Resistive {
    fn impedance_at(&self, _f: f64) -> Result<ComplexImpedance> {
        Ok(Complex64::new(self.0, 0.0))
    }
}

impl<F> ImpedanceModel for F
where
    F: Fn(f64) -> ComplexImpedance,
{
    fn impedance_at(&self, f: f64) -> Result<ComplexImpedance> {
        Ok(self(f))
    }
}

/// Impedance from the detection endcap to ground at frequency `f` (Hz).
pub fn impedance(params: &CircuitParams, state: SwitchState, f: f64) -> Result<ComplexImpedance> {
    if !(f > 0.0) || !f.is_finite() {
        return Err(Error::invalid(format!("frequency must be positive, got {f}")));
    }
    params.validate()?;
    let y = params.admittance(state, f);
    let z = 1.0 / y;
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::invalid(format!("non-finite impedance at {f} Hz")));
    }
    Ok(z)
}

/// Frequency-ordered complex impedance samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceTrace {
    points: Vec<(f64, ComplexImpedance)>,
}

impl ImpedanceTrace {
    pub fn new(points: Vec<(f64, ComplexImpedance)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("impedance trace is empty"));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::invalid("trace frequencies must be strictly increasing"));
        }
        Ok(ImpedanceTrace { points })
    }

    pub fn points(&self) -> &[(f64, ComplexImpedance)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn freqs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1.re).collect()
    }
}

/// `n` evenly spaced frequencies from `f_start` to `f_stop` inclusive.
pub fn uniform_grid(f_start: f64, f_stop: f64, n: usize) -> Result<Vec<f64>> {
    if !(f_start > 0.0 && f_stop > f_start && f_stop.is_finite()) {
        return Err(Error::invalid(format!("grid needs 0 < f_start < f_stop, got {f_start}..{f_stop}")));
    }
    if n < 2 {
        return Err(Error::invalid("grid needs at least two points"));
    }
    let step = (f_stop - f_start) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| if i == n - 1 { f_stop } else { f_start + step * i as f64 })
        .collect())
}

pub fn impedance_sweep(
    params: &CircuitParams,
    state: SwitchState,
    f_start: f64,
    f_stop: f64,
    n_points: usize,
) -> Result<ImpedanceTrace> {
    let grid = uniform_grid(f_start, f_stop, n_points)?;
    let points = grid
        .into_iter()
        .map(|f| impedance(params, state, f).map(|z| (f, z)))
        .collect::<Result<Vec<_>>>()?;
    ImpedanceTrace::new(points)
}

/// Resonance frequency, quality factor and parallel resistance of a peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceSummary {
    #[serde(rename = "f0_hz")]
    pub f0: f64,
    pub q: f64,
    /// Peak resistance from the fitted amplitude.
    #[serde(rename = "r_ohm")]
    pub r_parallel: f64,
    pub fit_residual: f64,
    /// Inductance used for the `R = Q ω L` cross-check.
    #[serde(skip)]
    pub l_total: Option<f64>,
}

impl ResonanceSummary {
    /// `Q · 2π f0 · L`, the parallel resistance implied by the resonance width.
    pub fn r_from_inductance(&self) -> Option<f64> {
        self.l_total.map(|l| self.q * 2.0 * PI * self.f0 * l)
    }
}

/// Fit a Lorentzian to Re[Z] of `trace` and report (f0, Q, R).
pub fn characterize_resonance(trace: &ImpedanceTrace, l_total: f64) -> Result<ResonanceSummary> {
    if !(l_total > 0.0) {
        return Err(Error::invalid("l_total must be positive"));
    }
    let fit = fit_lorentzian_points(&trace.freqs(), &trace.real_parts())?;
    Ok(ResonanceSummary {
        f0: fit.f0,
        q: fit.q,
        r_parallel: fit.amplitude,
        fit_residual: fit.residual,
        l_total: Some(l_total),
    })
}

/// Damping suppression `Re[Z_off(f_z)] / Re[Z_on(f_z)]`.
pub fn suppression_eta(params: &CircuitParams, f_z: f64) -> Result<f64> {
    let z_off = impedance(params, SwitchState::Off, f_z)?;
    let z_on = impedance(params, SwitchState::On, f_z)?;
    if z_on.re <= 1e-12 * z_on.norm() {
        return Err(Error::Singular(format!("Re[Z_on] vanishes at {f_z} Hz")));
    }
    Ok(z_off.re / z_on.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bare_tank(r: f64) -> CircuitParams {
        CircuitParams {
            c_trap: 8.2e-12,
            l1: 55e-9,
            l2: 15e-9,
            r_loss: r,
            c_amp: 0.0,
            c_tuning: 0.0,
            hemt: HemtModel::FITTED,
        }
    }

    // independent textbook parallel RLC
    fn parallel_rlc(r: f64, l: f64, c: f64, f: f64) -> Complex64 {
        let w = 2.0 * PI * f;
        1.0 / (Complex64::new(1.0 / r, w * c - 1.0 / (w * l)))
    }

    #[test]
    fn dc_limit_is_a_short() {
        let p = CircuitParams::default();
        let z_lo = impedance(&p, SwitchState::Off, 1.0).unwrap();
        assert!(z_lo.norm() < 1e-3, "{z_lo}");
        assert!(impedance(&p, SwitchState::Off, 0.0).is_err());
    }

    #[test]
    fn bare_tank_matches_parallel_rlc() {
        let p = bare_tank(83e3);
        let f0 = 1.0 / (2.0 * PI * (70e-9f64 * 8.2e-12).sqrt());
        assert!((f0 / 210.1e6 - 1.0).abs() < 1e-3);
        let z = impedance(&p, SwitchState::Off, f0).unwrap();
        assert!((z.re / 83e3 - 1.0).abs() < 1e-9);
        assert!(z.im.abs() < 1e-6 * 83e3);
        for f in [100e6, 205e6, 212e6, 400e6] {
            let a = impedance(&p, SwitchState::On, f).unwrap();
            let b = parallel_rlc(83e3, 70e-9, 8.2e-12, f);
            assert!((a - b).norm() < 1e-9 * b.norm());
        }
    }

    #[test]
    fn capacitive_asymptote() {
        let p = bare_tank(83e3);
        let f = 10.0 * 210.1e6;
        let z = impedance(&p, SwitchState::Off, f).unwrap();
        let xc = 1.0 / (2.0 * PI * f * 8.2e-12);
        assert!((z.norm() / xc - 1.0).abs() < 0.1);
    }

    #[test]
    fn degenerate_inductance_is_invalid() {
        let mut p = bare_tank(83e3);
        p.l1 = 0.0;
        p.l2 = 0.0;
        assert!(matches!(impedance(&p, SwitchState::Off, 1e8), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn sweep_endpoints_and_single_maximum() {
        let p = CircuitParams::default();
        let two = impedance_sweep(&p, SwitchState::Off, 1e8, 3e8, 2).unwrap();
        assert_eq!(two.freqs(), vec![1e8, 3e8]);

        let f_r = p.off_state_resonance().unwrap();
        let tr = impedance_sweep(&p, SwitchState::Off, f_r - 3e6, f_r + 3e6, 601).unwrap();
        let re = tr.real_parts();
        let maxima = (1..re.len() - 1).filter(|&i| re[i] > re[i - 1] && re[i] > re[i + 1]).count();
        assert_eq!(maxima, 1);
        let imax = re.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!(imax > 0 && imax < re.len() - 1);
    }

    #[test]
    fn default_peak_is_calibrated() {
        let p = CircuitParams::default();
        let f_r = p.off_state_resonance().unwrap();
        let z = impedance(&p, SwitchState::Off, f_r).unwrap();
        assert!((z.re / DEFAULT_PEAK_RESISTANCE - 1.0).abs() < 1e-9);
        assert!(p.r_loss > DEFAULT_PEAK_RESISTANCE);
    }

    fn peak_frequency(p: &CircuitParams, s: SwitchState) -> f64 {
        let tr = impedance_sweep(p, s, 120e6, 260e6, 14001).unwrap();
        let re = tr.real_parts();
        let i = re.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        tr.freqs()[i]
    }

    #[test]
    fn on_state_pulls_resonance_down_at_moderate_tuning_cap() {
        let p = CircuitParams::default();
        let off = peak_frequency(&p, SwitchState::Off);
        let on = peak_frequency(&p, SwitchState::On);
        assert!(on < off - 10e6, "on {on}, off {off}");
    }

    #[test]
    fn very_large_tuning_cap_shorts_the_tap() {
        // With the switch at the tap, 180 pF + r_on nearly grounds node M, so
        // the on-state tank is l1 against c_trap and resonates above the
        // off-state peak.
        let p = CircuitParams { c_tuning: 180e-12, ..CircuitParams::default() };
        let on = peak_frequency(&p, SwitchState::On);
        let l1_only = 1.0 / (2.0 * PI * (p.l1 * p.c_trap).sqrt());
        assert!(on > peak_frequency(&p, SwitchState::Off));
        assert!((on / l1_only - 1.0).abs() < 0.02, "{on} vs {l1_only}");
    }

    #[test]
    fn characterize_synthetic_rlc() {
        // R = 50 kΩ, Q = 500 parallel RLC at 200 MHz
        let (r, q, f0): (f64, f64, f64) = (50e3, 500.0, 200e6);
        let l = r / (q * 2.0 * PI * f0);
        let c = 1.0 / ((2.0 * PI * f0).powi(2) * l);
        let bw = f0 / q;
        let pts: Vec<_> = (0..801)
            .map(|i| {
                let f = f0 - 4.0 * bw + 8.0 * bw * i as f64 / 800.0;
                (f, parallel_rlc(r, l, c, f))
            })
            .collect();
        let s = characterize_resonance(&ImpedanceTrace::new(pts).unwrap(), l).unwrap();
        assert!((s.r_parallel / r - 1.0).abs() < 5e-3);
        assert!((s.q / q - 1.0).abs() < 5e-3);
        assert!((s.f0 / f0 - 1.0).abs() < 1e-6);
        let r_q = s.r_from_inductance().unwrap();
        assert!((r_q / s.r_parallel - 1.0).abs() < 0.02);
    }

    #[test]
    fn r_equals_q_omega_l() {
        let r: f64 = 800.0 * 2.0 * PI * 215.3e6 * 70e-9;
        assert!((r / 75.8e3 - 1.0).abs() < 1e-3, "{r}");
    }

    #[test]
    fn eta_is_one_for_identical_states() {
        let mut p = CircuitParams::default();
        p.hemt.r_on = p.hemt.r_off;
        let eta = suppression_eta(&p, 215.3e6).unwrap();
        assert!((eta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eta_reproduces_measured_scale() {
        let base = CircuitParams::default();
        let eta_at = |ct: f64| {
            let p = CircuitParams { c_tuning: ct, ..base }.tuned_to(215.3e6).unwrap();
            suppression_eta(&p, 215.3e6).unwrap()
        };
        let small = eta_at(2.1e-12);
        let large = eta_at(180e-12);
        assert!(small > 38.0 / 2.0 && small < 38.0 * 2.0, "eta(2.1 pF) = {small}");
        assert!(large > 330.0 / 2.0 && large < 330.0 * 2.0, "eta(180 pF) = {large}");
    }

    #[test]
    fn tuned_tank_resonates_at_target() {
        let p = CircuitParams::default().tuned_to(215.3e6).unwrap();
        assert!(p.admittance(SwitchState::Off, 215.3e6).im.abs() < 1e-12);
        let f_r = p.off_state_resonance().unwrap();
        assert!((f_r / 215.3e6 - 1.0).abs() < 1e-9);
    }
}
