//! Observable signals: Johnson-noise dip spectra and shunt-through
//! transmission, plus recovery of the impedance from a transmission trace.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{ImpedanceModel, ImpedanceTrace};
use crate::constants::BOLTZMANN;
use crate::error::{Error, Result};
use crate::particle::{electron_series_lc, ParticleEnsemble, TrapGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumUnit {
    /// Voltage noise density, V²/Hz.
    VoltsSquaredPerHz,
    /// Scaled so the largest value is 1.
    Normalized,
}

/// Real-valued density on a strictly increasing frequency grid.
///
/// A spectrum can carry a baseline: the same quantity with the particles
/// removed, sampled on the same grid. [`dip_fwhm`] measures depth against
/// it when present.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    freqs: Vec<f64>,
    values: Vec<f64>,
    baseline: Option<Vec<f64>>,
    pub unit: SpectrumUnit,
}

impl Spectrum {
    pub fn new(freqs: Vec<f64>, values: Vec<f64>, unit: SpectrumUnit) -> Result<Self> {
        if freqs.is_empty() || freqs.len() != values.len() {
            return Err(Error::invalid("spectrum needs matching, nonempty frequency and value columns"));
        }
        if freqs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("spectrum frequencies must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("spectrum values must be finite"));
        }
        Ok(Spectrum { freqs, values, baseline: None, unit })
    }

    pub fn with_baseline(mut self, baseline: Vec<f64>) -> Result<Self> {
        if baseline.len() != self.freqs.len() {
            return Err(Error::invalid("baseline length differs from the spectrum"));
        }
        self.baseline = Some(baseline);
        Ok(self)
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn baseline(&self) -> Option<&[f64]> {
        self.baseline.as_deref()
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Copy scaled so that the maximum value is 1. The baseline, if any, is
    /// scaled by the same factor.
    pub fn normalized(&self) -> Spectrum {
        let peak = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s = if peak > 0.0 { 1.0 / peak } else { 1.0 };
        Spectrum {
            freqs: self.freqs.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
            baseline: self.baseline.as_ref().map(|b| b.iter().map(|v| v * s).collect()),
            unit: SpectrumUnit::Normalized,
        }
    }
}

/// `n` evenly spaced points covering `center ± half_span`.
pub fn centered_grid(center: f64, half_span: f64, n: usize) -> Result<Vec<f64>> {
    if !(half_span > 0.0) || n < 2 {
        return Err(Error::invalid("centered grid needs a positive span and at least two points"));
    }
    crate::circuit::uniform_grid(center - half_span, center + half_span, n)
}

/// Johnson-noise spectrum `4 k_B T Re[Z_tot]` of the detection circuit with
/// the ensemble's equivalent series LC in parallel. With `ens = None` the
/// electron branch is open and the result is the bare resonance.
pub fn dip_spectrum<Z: ImpedanceModel + ?Sized>(
    circuit: &Z,
    geom: &TrapGeometry,
    ens: Option<&ParticleEnsemble>,
    f_z: f64,
    temperature: f64,
    grid: &[f64],
) -> Result<Spectrum> {
    if !(temperature > 0.0) {
        return Err(Error::invalid("temperature must be positive"));
    }
    if grid.len() < 3 || !(grid[0] < f_z && f_z < grid[grid.len() - 1]) {
        return Err(Error::Domain(format!("grid does not bracket the axial frequency {f_z} Hz")));
    }
    let lc = ens.map(|e| electron_series_lc(geom, e, f_z)).transpose()?;
    let scale = 4.0 * BOLTZMANN * temperature;
    let mut values = Vec::with_capacity(grid.len());
    let mut baseline = Vec::with_capacity(grid.len());
    for &f in grid {
        let z = circuit.impedance_at(f)?;
        let z_tot = match lc {
            Some((l_e, c_e)) => {
                let w = 2.0 * PI * f;
                let z_e = Complex64::new(0.0, w * l_e - 1.0 / (w * c_e));
                // z ∥ z_e, written to stay finite when z_e passes through zero
                z * z_e / (z + z_e)
            }
            None => z,
        };
        let v = scale * z_tot.re;
        let b = scale * z.re;
        if !(v.is_finite() && b.is_finite()) {
            return Err(Error::invalid(format!("non-finite noise density at {f} Hz")));
        }
        values.push(v.max(0.0));
        baseline.push(b.max(0.0));
    }
    Spectrum::new(grid.to_vec(), values, SpectrumUnit::VoltsSquaredPerHz)?.with_baseline(baseline)
}

fn crossing(f: &[f64], y: &[f64], i_from: usize, i_to: usize, level: f64) -> f64 {
    // y[i_from] is below `level`, y[i_to] at or above it; adjacent indices.
    let (fa, fb, ya, yb) = (f[i_from], f[i_to], y[i_from], y[i_to]);
    if yb == ya {
        return fb;
    }
    fa + (level - ya) * (fb - fa) / (yb - ya)
}

/// Full width at half depth of the spectrum's dip.
///
/// With a baseline the depth is read from `values / baseline`, so a dip
/// sitting on a sloping resonance is measured against the dip-free curve.
/// Without one, the shoulders on either side of the deepest interior
/// minimum serve as the reference level.
pub fn dip_fwhm(spec: &Spectrum) -> Result<f64> {
    let f = spec.freqs();
    let n = f.len();
    if n < 3 {
        return Err(Error::Analysis("spectrum too short to hold a dip".into()));
    }
    let y: Vec<f64> = match spec.baseline() {
        Some(b) => spec
            .values()
            .iter()
            .zip(b)
            .map(|(v, b)| if *b > 0.0 { v / b } else { 1.0 })
            .collect(),
        None => spec.values().to_vec(),
    };

    // Deepest interior local minimum, judged by how far it sits below the
    // lower of its two shoulders.
    let mut best: Option<(usize, f64, f64)> = None;
    for i in 1..n - 1 {
        if !(y[i] < y[i - 1] && y[i] <= y[i + 1]) {
            continue;
        }
        let left = y[..i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let right = y[i + 1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let reference = if spec.baseline().is_some() { 1.0 } else { left.min(right) };
        let depth = reference - y[i];
        if depth > 0.0 && best.is_none_or(|(_, d, _)| depth > d) {
            best = Some((i, depth, reference));
        }
    }
    let (imin, depth, reference) =
        best.ok_or_else(|| Error::Analysis("no dip found in spectrum".into()))?;
    let level = reference - 0.5 * depth;

    let mut lo = None;
    for i in (0..imin).rev() {
        if y[i] >= level {
            lo = Some(crossing(f, &y, i + 1, i, level));
            break;
        }
    }
    let mut hi = None;
    for i in imin + 1..n {
        if y[i] >= level {
            hi = Some(crossing(f, &y, i - 1, i, level));
            break;
        }
    }
    match (lo, hi) {
        (Some(a), Some(b)) => Ok(b - a),
        _ => Err(Error::Analysis("dip runs off the edge of the grid".into())),
    }
}

/// Effective impedance of the weakly coupled measurement ports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceImpedance {
    pub z0_prime: f64,
}

impl SourceImpedance {
    pub fn new(z0_prime: f64) -> Result<Self> {
        if !(z0_prime > 0.0 && z0_prime.is_finite()) {
            return Err(Error::invalid("source impedance must be positive"));
        }
        Ok(SourceImpedance { z0_prime })
    }
}

/// Port impedance seen through a capacitive divider: `(c_shunt/c_couple)² z_line`.
pub fn divider_source_impedance(c_couple: f64, c_shunt: f64, z_line: f64) -> Result<SourceImpedance> {
    if !(c_couple > 0.0 && c_shunt > 0.0) {
        return Err(Error::invalid("divider capacitances must be positive"));
    }
    SourceImpedance::new((c_shunt / c_couple).powi(2) * z_line)
}

/// Complex transmission `V_out / V_in` on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionTrace {
    points: Vec<(f64, Complex64)>,
    /// Set when some point has `|Z| > Z0'/10`, outside the weak-coupling regime.
    pub weak_coupling_violated: bool,
}

impl TransmissionTrace {
    pub fn new(points: Vec<(f64, Complex64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("transmission trace is empty"));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::invalid("trace frequencies must be strictly increasing"));
        }
        Ok(TransmissionTrace { points, weak_coupling_violated: false })
    }

    pub fn points(&self) -> &[(f64, Complex64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Divide out a cable calibration measured with the ports shorted together.
    pub fn deembed(&self, cal: &[Complex64]) -> Result<TransmissionTrace> {
        if cal.len() != self.points.len() {
            return Err(Error::invalid("calibration column length differs from the trace"));
        }
        let points = self
            .points
            .iter()
            .zip(cal)
            .map(|(&(f, s), &c)| {
                if c.norm() == 0.0 {
                    Err(Error::Singular(format!("zero calibration gain at {f} Hz")))
                } else {
                    Ok((f, s / c))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TransmissionTrace { points, ..*self })
    }
}

fn s21_point(z: Complex64, src: &SourceImpedance) -> Complex64 {
    z / (src.z0_prime + 2.0 * z)
}

/// Forward shunt-through model `s21 = Z / (Z0' + 2Z)`.
pub fn shunt_through_s21<Z: ImpedanceModel + ?Sized>(
    z: &Z,
    src: &SourceImpedance,
    grid: &[f64],
) -> Result<TransmissionTrace> {
    let mut violated = false;
    let points = grid
        .iter()
        .map(|&f| {
            let zf = z.impedance_at(f)?;
            violated |= zf.norm() > 0.1 * src.z0_prime;
            Ok((f, s21_point(zf, src)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut trace = TransmissionTrace::new(points)?;
    trace.weak_coupling_violated = violated;
    Ok(trace)
}

/// Forward model applied to an already computed impedance trace.
pub fn shunt_through_trace(trace: &ImpedanceTrace, src: &SourceImpedance) -> TransmissionTrace {
    let points = trace.points().iter().map(|&(f, z)| (f, s21_point(z, src))).collect();
    let violated = trace.points().iter().any(|p| p.1.norm() > 0.1 * src.z0_prime);
    TransmissionTrace { points, weak_coupling_violated: violated }
}

/// Inverse shunt-through relation `Z = Z0' s / (1 - 2s)`.
pub fn impedance_from_s21(trace: &TransmissionTrace, src: &SourceImpedance) -> Result<ImpedanceTrace> {
    let points = trace
        .points()
        .iter()
        .map(|&(f, s)| {
            let den = 1.0 - 2.0 * s;
            if den.norm() < 1e-12 {
                return Err(Error::Singular(format!("s21 = 1/2 at {f} Hz, impedance is unbounded")));
            }
            Ok((f, src.z0_prime * s / den))
        })
        .collect::<Result<Vec<_>>>()?;
    ImpedanceTrace::new(points)
}
