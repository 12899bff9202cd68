//! Measurements on lineshapes: peak fits, widths, maxima.

use std::f64::consts::PI;

use super::lineshape::Lineshape;
use crate::error::{Error, Result};
use crate::optimize::{levenberg_marquardt, LmOptions};

/// Lorentzian plus constant fitted to a window of a lineshape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakFit {
    pub center: f64,
    /// Area under the Lorentzian part.
    pub area: f64,
    pub hwhm: f64,
    pub background: f64,
}

impl PeakFit {
    pub fn fwhm(&self) -> f64 {
        2.0 * self.hwhm
    }
}

/// Fit `A (a/π) / (a² + (f − c)²) + b` over `guess ± half_window`.
pub fn fit_peak(shape: &Lineshape, guess: f64, half_window: f64, hwhm_guess: f64) -> Result<PeakFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = shape
        .offsets()
        .iter()
        .zip(shape.density())
        .filter(|(f, _)| (**f - guess).abs() <= half_window)
        .map(|(f, d)| (*f, *d))
        .unzip();
    if x.len() < 5 {
        return Err(Error::Analysis(format!("too few points near {guess} Hz to fit a peak")));
    }
    let peak = y.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Analysis(format!("no signal near {guess} Hz")));
    }
    let a0 = hwhm_guess.max(x[1] - x[0]);
    let area0 = peak * PI * a0;
    // (area / area0, centre offset / a0, ln(hwhm / a0), background / peak)
    let unpack = |p: &[f64]| (p[0] * area0, guess + p[1] * a0, a0 * p[2].exp(), p[3] * peak);
    let residuals = |p: &[f64]| -> Option<Vec<f64>> {
        let (area, c, a, b) = unpack(p);
        if !a.is_finite() || a <= 0.0 {
            return None;
        }
        Some(
            x.iter()
                .zip(&y)
                .map(|(f, d)| (area * a / PI / (a * a + (f - c).powi(2)) + b - d) / peak)
                .collect(),
        )
    };
    let out = levenberg_marquardt(residuals, &[1.0, 0.0, 0.0, 0.0], &LmOptions::default())
        .ok_or_else(|| Error::Analysis("peak model could not be evaluated".into()))?;
    let (area, center, hwhm, background) = unpack(&out.x);
    Ok(PeakFit { center, area, hwhm, background })
}

/// Width between the half-maximum crossings around the global maximum,
/// with linear interpolation.
pub fn fwhm_of_maximum(shape: &Lineshape) -> Result<f64> {
    let f = shape.offsets();
    let d = shape.density();
    let (imax, &dmax) = d
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Analysis("empty lineshape".into()))?;
    let half = 0.5 * dmax;
    let interp = |i: usize, j: usize| f[i] + (half - d[i]) * (f[j] - f[i]) / (d[j] - d[i]);
    let lo = (0..imax).rev().find(|&i| d[i] < half).map(|i| interp(i, i + 1));
    let hi = (imax + 1..d.len()).find(|&i| d[i] < half).map(|i| interp(i, i - 1));
    match (lo, hi) {
        (Some(a), Some(b)) => Ok(b - a),
        _ => Err(Error::Analysis("maximum is not bracketed by half-maximum crossings".into())),
    }
}

/// Offset of the global maximum.
pub fn argmax_offset(shape: &Lineshape) -> f64 {
    let i = shape
        .density()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |p| p.0);
    shape.offsets()[i]
}

/// Centred moving average over `2 * half + 1` points, shrinking at the edges.
pub fn smoothed(shape: &Lineshape, half: usize) -> Result<Lineshape> {
    let d = shape.density();
    let n = d.len();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + d[i];
    }
    let out = (0..n)
        .map(|i| {
            let a = i.saturating_sub(half);
            let b = (i + half + 1).min(n);
            (prefix[b] - prefix[a]) / (b - a) as f64
        })
        .collect();
    Lineshape::new(shape.offsets().to_vec(), out)
}

/// Local maxima whose prominence exceeds `min_prominence` times the global
/// maximum. Prominence is the height above the higher of the two minima
/// separating the peak from taller ground on each side.
pub fn prominent_maxima(shape: &Lineshape, min_prominence: f64) -> Vec<f64> {
    let d = shape.density();
    let n = d.len();
    let top = d.iter().copied().fold(0.0, f64::max);
    let mut out = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if !(d[i] > d[i - 1] && d[i] >= d[i + 1]) {
            continue;
        }
        let mut left_min = d[i];
        for j in (0..i).rev() {
            if d[j] > d[i] {
                break;
            }
            left_min = left_min.min(d[j]);
        }
        let mut right_min = d[i];
        for j in i + 1..n {
            if d[j] > d[i] {
                break;
            }
            right_min = right_min.min(d[j]);
        }
        if d[i] - left_min.max(right_min) > min_prominence * top {
            out.push(shape.offsets()[i]);
        }
    }
    out
}
