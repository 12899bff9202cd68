use serde::{Deserialize, Serialize};

use crate::constants::{BOLTZMANN, PLANCK};
use crate::error::{Error, Result};

/// Spin projection along the field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Spin {
    Down,
    Up,
}

impl Spin {
    pub fn m_s(self) -> f64 {
        match self {
            Spin::Down => -0.5,
            Spin::Up => 0.5,
        }
    }
}

/// `|n_c, m_s, n_z⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuantumState {
    pub n_c: u32,
    pub spin: Spin,
    pub n_z: u32,
}

impl QuantumState {
    pub fn new(n_c: u32, spin: Spin, n_z: u32) -> Self {
        QuantumState { n_c, spin, n_z }
    }
}

/// Cyclotron, spin and axial frequencies in Hz. The anomaly frequency is
/// derived, so it is always consistent with the other two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModeFrequencies {
    pub f_c: f64,
    pub f_s: f64,
    pub f_z: f64,
}

impl Default for ModeFrequencies {
    /// 150.5 GHz spin frequency with a 173 MHz anomaly frequency, and a
    /// 200 MHz axial frequency.
    fn default() -> Self {
        ModeFrequencies { f_c: 150.5e9 - 173e6, f_s: 150.5e9, f_z: 200e6 }
    }
}

impl ModeFrequencies {
    pub fn f_a(&self) -> f64 {
        self.f_s - self.f_c
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.f_c, self.f_s, self.f_z].iter().all(|f| *f > 0.0 && f.is_finite());
        if !ok || self.f_a() == 0.0 {
            return Err(Error::invalid(format!("mode frequencies out of range: {self:?}")));
        }
        Ok(())
    }
}

/// Magnetic-bottle shifts per axial quantum, in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BottleParams {
    pub delta_c: f64,
    pub delta_s: f64,
}

impl Default for BottleParams {
    fn default() -> Self {
        BottleParams { delta_c: 3.868, delta_s: 3.872 }
    }
}

impl BottleParams {
    pub const NONE: BottleParams = BottleParams { delta_c: 0.0, delta_s: 0.0 };

    pub fn delta_a(&self) -> f64 {
        self.delta_s - self.delta_c
    }
}

/// Energy of `state` in joules, including the bottle couplings.
pub fn energy(state: &QuantumState, freqs: &ModeFrequencies, bottle: &BottleParams) -> f64 {
    let nc = state.n_c as f64 + 0.5;
    let nz = state.n_z as f64 + 0.5;
    let ms = state.spin.m_s();
    PLANCK
        * (freqs.f_c * nc
            + freqs.f_s * ms
            + freqs.f_z * nz
            + bottle.delta_c * nc * nz
            + bottle.delta_s * ms * nz)
}

/// Shift of the axial frequency, Hz, for cyclotron level `n_c` and spin `spin`.
pub fn axial_shift(n_c: u32, spin: Spin, bottle: &BottleParams) -> f64 {
    (n_c as f64 + 0.5) * bottle.delta_c + spin.m_s() * bottle.delta_s
}

/// Cyclotron and anomaly frequency shifts, Hz, caused by axial level `n_z`.
pub fn backaction_shifts(n_z: u32, bottle: &BottleParams) -> (f64, f64) {
    let nz = n_z as f64 + 0.5;
    (nz * bottle.delta_c, nz * bottle.delta_a())
}

/// Mean axial occupation `k_B T / (h f_z)` in the classical limit.
pub fn mean_axial_quanta(temperature: f64, f_z: f64) -> Result<f64> {
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return Err(Error::invalid("temperature must be non-negative"));
    }
    if !(f_z > 0.0) {
        return Err(Error::invalid("axial frequency must be positive"));
    }
    Ok(BOLTZMANN * temperature / (PLANCK * f_z))
}

/// Probability of axial level `n` in a geometric distribution with mean `nbar`.
pub fn thermal_weight(n: u32, nbar: f64) -> Result<f64> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::invalid("mean occupation must be non-negative"));
    }
    Ok(thermal_weight_unchecked(n, nbar))
}

pub(crate) fn thermal_weight_unchecked(n: u32, nbar: f64) -> f64 {
    if nbar == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let q = nbar / (nbar + 1.0);
    q.powi(n as i32) / (nbar + 1.0)
}

/// Smallest `n_max` such that levels `0..=n_max` carry at least `coverage`
/// of the thermal weight.
pub fn thermal_cutoff(nbar: f64, coverage: f64) -> u32 {
    if nbar == 0.0 {
        return 0;
    }
    // P(n > N) = q^(N+1)
    let q = nbar / (nbar + 1.0);
    let tail = (1.0 - coverage).max(f64::MIN_POSITIVE);
    let n = (tail.ln() / q.ln()).ceil() - 1.0;
    n.max(0.0) as u32
}

/// Mean occupation for a given temperature and axial frequency, kept
/// together so the pair stays consistent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalAxial {
    pub nbar: f64,
    pub temperature: f64,
    pub f_z: f64,
}

impl ThermalAxial {
    pub fn new(temperature: f64, f_z: f64) -> Result<Self> {
        Ok(ThermalAxial { nbar: mean_axial_quanta(temperature, f_z)?, temperature, f_z })
    }
}

/// Below this value of [`dispersive_ratio`] the lineshape resolves into one
/// peak per axial level.
pub const DISPERSIVE_THRESHOLD: f64 = 0.1;

/// `nbar γ_z / (2π δ_c)`: thermal level-change rate against peak spacing.
pub fn dispersive_ratio(nbar: f64, gamma_z: f64, delta_c: f64) -> Result<f64> {
    if !(delta_c > 0.0) {
        return Err(Error::invalid("delta_c must be positive"));
    }
    if !(nbar >= 0.0 && gamma_z >= 0.0) {
        return Err(Error::invalid("nbar and gamma_z must be non-negative"));
    }
    Ok(nbar * gamma_z / (2.0 * std::f64::consts::PI * delta_c))
}

pub fn is_strongly_dispersive(nbar: f64, gamma_z: f64, delta_c: f64) -> Result<bool> {
    Ok(dispersive_ratio(nbar, gamma_z, delta_c)? < DISPERSIVE_THRESHOLD)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn default_frequencies() {
        let f = ModeFrequencies::default();
        assert!((f.f_a() - 173e6).abs() < 1e-3);
        assert_eq!((f.f_c / 1e8).round(), 1503.0);
        let b = BottleParams::default();
        assert!((b.delta_a() - 0.004).abs() < 1e-12);
    }

    #[test]
    fn energy_without_bottle_is_harmonic() {
        let f = ModeFrequencies::default();
        let s = QuantumState::new(2, Spin::Up, 3);
        let e = energy(&s, &f, &BottleParams::NONE);
        let expected = PLANCK * (f.f_c * 2.5 + f.f_s * 0.5 + f.f_z * 3.5);
        assert!((e / expected - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cyclotron_and_spin_transition_energies() {
        let f = ModeFrequencies::default();
        let b = BottleParams::default();
        let d = energy(&QuantumState::new(1, Spin::Down, 0), &f, &b)
            - energy(&QuantumState::new(0, Spin::Down, 0), &f, &b);
        assert!((d / PLANCK - (f.f_c + 0.5 * b.delta_c)).abs() < 1e-3);

        let d = energy(&QuantumState::new(0, Spin::Up, 0), &f, &b)
            - energy(&QuantumState::new(0, Spin::Down, 0), &f, &b);
        // exact algebra: the bottle term contributes delta_s * (n_z + 1/2)
        let direct = PLANCK * (f.f_s + 0.5 * b.delta_s);
        assert!((d - direct).abs() < 1e-9 * direct);
        assert!(((f.f_s - 150.5e9) + 0.5 * b.delta_s - 1.936).abs() < 1e-12);
    }

    #[test]
    fn axial_shift_steps() {
        let b = BottleParams::default();
        let step_c = axial_shift(1, Spin::Down, &b) - axial_shift(0, Spin::Down, &b);
        assert!((step_c - 3.868).abs() < 1e-12);
        let step_s = axial_shift(0, Spin::Up, &b) - axial_shift(0, Spin::Down, &b);
        assert!((step_s - 3.872).abs() < 1e-12);
        assert_eq!(axial_shift(5, Spin::Up, &BottleParams::NONE), 0.0);
    }

    #[test]
    fn backaction_values() {
        let (c, a) = backaction_shifts(0, &BottleParams::default());
        assert!((c - 1.934).abs() < 1e-12 && (a - 0.002).abs() < 1e-12);
        let fig = BottleParams { delta_c: 4.0, delta_s: 4.0 };
        let (c, a) = backaction_shifts(10, &fig);
        assert!((c - 42.0).abs() < 1e-12);
        assert_eq!(a, 0.0);
    }

    #[test]
    fn occupation_at_100_mk() {
        let nbar = mean_axial_quanta(0.1, 200e6).unwrap();
        assert!((nbar - 10.42).abs() < 0.01, "{nbar}");
        assert_eq!(mean_axial_quanta(0.0, 200e6).unwrap(), 0.0);
        let twice = mean_axial_quanta(0.2, 200e6).unwrap();
        assert!((twice / nbar - 2.0).abs() < 1e-12);
        let t = ThermalAxial::new(0.1, 200e6).unwrap();
        assert_eq!(t.nbar, nbar);
    }

    #[test]
    fn geometric_weights() {
        let total: f64 = (0..=1000).map(|n| thermal_weight(n, 10.0).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let r = thermal_weight(4, 10.0).unwrap() / thermal_weight(3, 10.0).unwrap();
        assert!((r - 10.0 / 11.0).abs() < 1e-14);
        let mean: f64 = (0..=2000).map(|n| n as f64 * thermal_weight(n, 10.0).unwrap()).sum();
        assert!((mean - 10.0).abs() < 1e-9);
    }

    #[test]
    fn cutoff_covers_requested_weight() {
        let n = thermal_cutoff(10.0, 0.999);
        let w: f64 = (0..=n).map(|k| thermal_weight(k, 10.0).unwrap()).sum();
        let w_less: f64 = (0..n).map(|k| thermal_weight(k, 10.0).unwrap()).sum();
        assert!(w >= 0.999 && w_less < 0.999, "{n}");
        assert_eq!(thermal_cutoff(0.0, 0.999), 0);
    }

    #[test]
    fn dispersive_classification() {
        let g = 2.0 * PI * 1.0;
        assert!((dispersive_ratio(10.0, g, 4.0).unwrap() - 2.5).abs() < 1e-12);
        assert!((dispersive_ratio(10.0, g / 100.0, 4.0).unwrap() - 0.025).abs() < 1e-12);
        assert_eq!(dispersive_ratio(10.0, 0.0, 4.0).unwrap(), 0.0);
        assert!(!is_strongly_dispersive(10.0, g, 4.0).unwrap());
        assert!(is_strongly_dispersive(10.0, g / 100.0, 4.0).unwrap());
    }
}
