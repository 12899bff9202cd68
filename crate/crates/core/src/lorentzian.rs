//! Lorentzian resonance model `A / (1 + (2Q (f - f0) / f0)^2)` and its
//! damped least-squares fit.

use crate::error::{Error, Result};
use crate::optimize::{levenberg_marquardt, LmOptions};

/// Value of a resonance Lorentzian with peak `amplitude` at `f0` and quality factor `q`.
pub fn lorentzian(f: f64, f0: f64, q: f64, amplitude: f64) -> f64 {
    let u = 2.0 * q * (f - f0) / f0;
    amplitude / (1.0 + u * u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianFit {
    pub f0: f64,
    pub q: f64,
    pub amplitude: f64,
    /// RMS of the residuals divided by the fitted amplitude.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimum number of samples accepted by [`fit_lorentzian_points`].
pub const MIN_POINTS: usize = 7;

/// Initial (f0, Q, amplitude) from the grid maximum and half-power crossings.
pub(crate) fn initial_guess(freqs: &[f64], values: &[f64]) -> Result<(f64, f64, f64)> {
    let fail = |reason: &str| Error::FitFailure {
        reason: reason.to_string(),
        residual: f64::NAN,
        iterations: 0,
        best: None,
    };
    let (imax, &vmax) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| fail("empty trace"))?;
    let vmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(vmax > 0.0) || vmax - vmin <= 1e-12 * vmax.abs() {
        return Err(fail("no peak: trace is flat"));
    }
    if imax == 0 || imax == values.len() - 1 {
        return Err(fail("no interior peak: maximum sits on the trace boundary"));
    }
    let half = 0.5 * vmax;
    let cross = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = imax;
        for i in range {
            if values[i] < half {
                let (fa, fb) = (freqs[prev], freqs[i]);
                let (va, vb) = (values[prev], values[i]);
                return Some(fa + (half - va) * (fb - fa) / (vb - va));
            }
            prev = i;
        }
        None
    };
    let lo = cross(&mut (0..imax).rev());
    let hi = cross(&mut (imax + 1..values.len()));
    let f0 = freqs[imax];
    let width = match (lo, hi) {
        (Some(l), Some(h)) => h - l,
        (Some(l), None) => 2.0 * (f0 - l),
        (None, Some(h)) => 2.0 * (h - f0),
        (None, None) => {
            // Peak wider than the window; start from the window span.
            freqs[freqs.len() - 1] - freqs[0]
        }
    };
    if !(width > 0.0) {
        return Err(fail("could not bracket the half-power width"));
    }
    Ok((f0, f0 / width, vmax))
}

/// Fit a single Lorentzian peak to `(freqs, values)`.
///
/// Parameters are fitted as (ppm offset of f0, ln Q, ln amplitude) so that
/// all three are of order one.
pub fn fit_lorentzian_points(freqs: &[f64], values: &[f64]) -> Result<LorentzianFit> {
    if freqs.len() != values.len() {
        return Err(Error::invalid("frequency and value columns differ in length"));
    }
    if freqs.len() < MIN_POINTS {
        return Err(Error::invalid(format!(
            "need at least {MIN_POINTS} points for a Lorentzian fit, got {}",
            freqs.len()
        )));
    }
    let (f_init, q_init, a_init) = initial_guess(freqs, values)?;
    let unpack = |p: &[f64]| (f_init * (1.0 + p[0] * 1e-6), p[1].exp(), p[2].exp());
    let residuals = |p: &[f64]| -> Option<Vec<f64>> {
        let (f0, q, a) = unpack(p);
        if !(f0 > 0.0 && q.is_finite() && a.is_finite()) {
            return None;
        }
        Some(
            freqs
                .iter()
                .zip(values)
                .map(|(&f, &y)| (lorentzian(f, f0, q, a) - y) / a_init)
                .collect(),
        )
    };
    let x0 = [0.0, q_init.ln(), a_init.ln()];
    let out = levenberg_marquardt(residuals, &x0, &LmOptions::default()).ok_or_else(|| {
        Error::FitFailure {
            reason: "model could not be evaluated at the initial guess".into(),
            residual: f64::NAN,
            iterations: 0,
            best: None,
        }
    })?;
    let (f0, q, amplitude) = unpack(&out.x);
    let residual = (out.ssr / freqs.len() as f64).sqrt() * a_init / amplitude;
    if !out.converged {
        return Err(Error::FitFailure {
            reason: "Levenberg-Marquardt did not converge".into(),
            residual,
            iterations: out.iterations,
            best: Some(vec![f0, q, amplitude]),
        });
    }
    Ok(LorentzianFit { f0, q, amplitude, residual, iterations: out.iterations, converged: true })
}
