//! Fits of measured data to the circuit model and the tuning-capacitor
//! design scan.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::circuit::{impedance, suppression_eta, CircuitParams, HemtModel, ImpedanceTrace, ResonanceSummary, SwitchState};
use crate::error::{Error, Result};
use crate::lorentzian::fit_lorentzian_points;
use crate::optimize::{levenberg_marquardt, nelder_mead, LmOptions, NelderMeadOptions};
use crate::spectra::Spectrum;

/// Anything with a single resonance peak to fit.
pub trait PeakData {
    fn peak_columns(&self) -> (Vec<f64>, Vec<f64>);
}

impl PeakData for ImpedanceTrace {
    fn peak_columns(&self) -> (Vec<f64>, Vec<f64>) {
        (self.freqs(), self.real_parts())
    }
}

impl PeakData for Spectrum {
    fn peak_columns(&self) -> (Vec<f64>, Vec<f64>) {
        (self.freqs().to_vec(), self.values().to_vec())
    }
}

/// Lorentzian fit of a resonance peak. `r_parallel` is the fitted peak
/// value, in whatever unit the data carries.
pub fn fit_lorentzian<D: PeakData + ?Sized>(data: &D) -> Result<ResonanceSummary> {
    let (f, y) = data.peak_columns();
    let fit = fit_lorentzian_points(&f, &y)?;
    Ok(ResonanceSummary {
        f0: fit.f0,
        q: fit.q,
        r_parallel: fit.amplitude,
        fit_residual: fit.residual,
        l_total: None,
    })
}

/// One point of a tuning-capacitor series: off-state resistance and
/// suppression factor measured with `c_tuning` installed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchMeasurement {
    pub c_tuning: f64,
    pub r_off_state: f64,
    pub eta: f64,
    pub sigma_r: Option<f64>,
    pub sigma_eta: Option<f64>,
}

impl SwitchMeasurement {
    pub fn new(c_tuning: f64, r_off_state: f64, eta: f64) -> Result<Self> {
        let m = SwitchMeasurement { c_tuning, r_off_state, eta, sigma_r: None, sigma_eta: None };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_tuning > 0.0 && self.r_off_state > 0.0 && self.eta > 0.0) {
            return Err(Error::invalid(format!("measurement needs positive c_tuning, R and eta: {self:?}")));
        }
        Ok(())
    }

    /// A switch that increases the damping when turned on is suspicious.
    pub fn is_suspect(&self) -> bool {
        self.eta < 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub hemt: HemtModel,
    /// Root-mean-square of the log residuals, about the RMS relative error.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Serialize, Deserialize)]
struct FitResultRecord {
    r_off_ohm: f64,
    r_on_ohm: f64,
    c_ds_f: f64,
    residual: f64,
    converged: bool,
}

impl Serialize for FitResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FitResultRecord {
            r_off_ohm: self.hemt.r_off,
            r_on_ohm: self.hemt.r_on,
            c_ds_f: self.hemt.c_ds,
            residual: self.residual,
            converged: self.converged,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FitResult {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = FitResultRecord::deserialize(d)?;
        Ok(FitResult {
            hemt: HemtModel { r_off: r.r_off_ohm, r_on: r.r_on_ohm, c_ds: r.c_ds_f },
            residual: r.residual,
            iterations: 0,
            converged: r.converged,
        })
    }
}

/// Off-state resistance and suppression factor the model predicts for a
/// given tuning capacitor, with the tank trimmed so the off-state resonance
/// sits at `f_z`.
pub fn switch_response(fixed: &CircuitParams, hemt: &HemtModel, c_tuning: f64, f_z: f64) -> Result<(f64, f64)> {
    let p = CircuitParams { hemt: *hemt, c_tuning, ..*fixed }.tuned_to(f_z)?;
    let r = impedance(&p, SwitchState::Off, f_z)?.re;
    Ok((r, suppression_eta(&p, f_z)?))
}

/// Number of perturbed restarts after the first simplex run.
const RESTARTS: u64 = 3;
const RESTART_SEED: u64 = 0x5eed;

fn log_residuals(data: &[SwitchMeasurement], fixed: &CircuitParams, f_z: f64, x: &[f64]) -> Option<Vec<f64>> {
    let hemt = HemtModel { r_off: x[0].exp(), r_on: x[1].exp(), c_ds: x[2].exp() };
    if hemt.validate().is_err() {
        return None;
    }
    let mut out = Vec::with_capacity(2 * data.len());
    for m in data {
        let (r, eta) = switch_response(fixed, &hemt, m.c_tuning, f_z).ok()?;
        if !(r > 0.0 && eta > 0.0) {
            return None;
        }
        out.push(r.ln() - m.r_off_state.ln());
        out.push(eta.ln() - m.eta.ln());
    }
    Some(out)
}

/// Starting point used by [`fit_hemt_model`]: the largest measured
/// resistance for `r_off`, 10 Ω and 1 pF.
pub fn default_hemt_guess(data: &[SwitchMeasurement]) -> HemtModel {
    let r_max = data.iter().map(|m| m.r_off_state).fold(0.0, f64::max);
    HemtModel { r_off: r_max, r_on: 10.0, c_ds: 1e-12 }
}

/// Fit the three switch parameters to (R, η) measurements.
pub fn fit_hemt_model(data: &[SwitchMeasurement], fixed: &CircuitParams, f_z: f64) -> Result<FitResult> {
    fit_hemt_model_from(data, fixed, f_z, &default_hemt_guess(data))
}

/// [`fit_hemt_model`] from an explicit starting point.
///
/// Minimizes the summed squared log residuals of R and η with a simplex
/// search from `start` and from three deterministic perturbations of it.
/// The best run (lowest objective, then lowest index) is polished with a
/// damped Gauss-Newton step so that refitting from the answer returns it.
pub fn fit_hemt_model_from(
    data: &[SwitchMeasurement],
    fixed: &CircuitParams,
    f_z: f64,
    start: &HemtModel,
) -> Result<FitResult> {
    if data.len() < 3 {
        return Err(Error::invalid(format!(
            "underdetermined: {} measurements for 3 parameters",
            data.len()
        )));
    }
    for m in data {
        m.validate()?;
    }
    let (c_lo, c_hi) = data
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), m| (lo.min(m.c_tuning), hi.max(m.c_tuning)));
    if c_hi < 10.0 * c_lo {
        return Err(Error::invalid("c_tuning values must span at least one decade"));
    }
    if !(f_z > 0.0) {
        return Err(Error::invalid("f_z must be positive"));
    }

    let objective = |x: &[f64]| match log_residuals(data, fixed, f_z, x) {
        Some(r) => r.iter().map(|v| v * v).sum(),
        None => f64::INFINITY,
    };
    let x0 = [start.r_off.ln(), start.r_on.ln(), start.c_ds.max(1e-18).ln()];
    let opts = NelderMeadOptions::default();

    let mut starts = vec![x0.to_vec()];
    let kick = Normal::new(0.0, 0.5).expect("valid normal");
    for k in 1..=RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
        rng.set_stream(k);
        starts.push(x0.iter().map(|v| v + kick.sample(&mut rng)).collect());
    }
    let runs: Vec<_> = starts.iter().map(|s| nelder_mead(objective, s, &opts)).collect();
    let (_, best) = runs
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.value.total_cmp(&b.value).then(i.cmp(j)))
        .expect("at least one run");
    let nm_iterations: usize = runs.iter().map(|r| r.iterations).sum();

    if !best.value.is_finite() {
        return Err(Error::FitFailure {
            reason: "model could not be evaluated anywhere the simplex went".into(),
            residual: f64::INFINITY,
            iterations: nm_iterations,
            best: None,
        });
    }

    let polish = levenberg_marquardt(|x: &[f64]| log_residuals(data, fixed, f_z, x), &best.x, &LmOptions::default());
    let (x, ssr, lm_iterations, lm_ok) = match polish {
        Some(p) if p.ssr <= best.value => (p.x, p.ssr, p.iterations, p.converged),
        _ => (best.x.clone(), best.value, 0, true),
    };
    let n_res = 2 * data.len();
    Ok(FitResult {
        hemt: HemtModel { r_off: x[0].exp(), r_on: x[1].exp(), c_ds: x[2].exp() },
        residual: (ssr / n_res as f64).sqrt(),
        iterations: nm_iterations + lm_iterations,
        converged: best.converged && lm_ok,
    })
}

/// Requirements on the switch: enough off-state resistance to detect the
/// particle and enough suppression when on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignConstraints {
    pub r_min: f64,
    pub eta_min: f64,
}

impl Default for DesignConstraints {
    fn default() -> Self {
        DesignConstraints { r_min: 60e3, eta_min: 100.0 }
    }
}

impl DesignConstraints {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.eta_min > 0.0) {
            return Err(Error::invalid("design constraints must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub c_tuning: f64,
    pub r_off_state: f64,
    pub eta: f64,
    pub meets_constraints: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
    /// Smallest grid value meeting both constraints.
    pub recommended: Option<f64>,
    pub satisfiable: bool,
    /// When nothing is feasible: the row closest to feasibility, judged by
    /// `min(R / r_min, η / eta_min)`.
    pub pareto_best: Option<ScanRow>,
}

/// Tabulate (R, η) over `grid` and pick a tuning capacitor.
pub fn scan_ctuning(
    params: &CircuitParams,
    f_z: f64,
    grid: &[f64],
    constraints: &DesignConstraints,
) -> Result<ScanResult> {
    if grid.is_empty() {
        return Err(Error::invalid("c_tuning grid is empty"));
    }
    if grid.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::invalid("c_tuning values must be positive"));
    }
    constraints.validate()?;
    let rows = grid
        .iter()
        .map(|&c| {
            let (r, eta) = switch_response(params, &params.hemt, c, f_z)?;
            Ok(ScanRow {
                c_tuning: c,
                r_off_state: r,
                eta,
                meets_constraints: r >= constraints.r_min && eta >= constraints.eta_min,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let recommended = rows
        .iter()
        .filter(|r| r.meets_constraints)
        .map(|r| r.c_tuning)
        .min_by(f64::total_cmp);
    let satisfiable = recommended.is_some();
    let pareto_best = if satisfiable {
        None
    } else {
        let score = |r: &ScanRow| (r.r_off_state / constraints.r_min).min(r.eta / constraints.eta_min);
        rows.iter().copied().max_by(|a, b| score(a).total_cmp(&score(b)))
    };
    Ok(ScanResult { rows, recommended, satisfiable, pareto_best })
}

/// `n` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(Error::invalid("log grid needs 0 < lo < hi and at least two points"));
    }
    let r = (hi / lo).ln();
    Ok((0..n)
        .map(|i| if i == n - 1 { hi } else { lo * (r * i as f64 / (n - 1) as f64).exp() })
        .collect())
}

/// Noiseless measurements generated by the forward model, for round trips.
pub fn synthetic_measurements(
    fixed: &CircuitParams,
    hemt: &HemtModel,
    c_tuning: &[f64],
    f_z: f64,
) -> Result<Vec<SwitchMeasurement>> {
    c_tuning
        .iter()
        .map(|&c| {
            let (r, eta) = switch_response(fixed, hemt, c, f_z)?;
            SwitchMeasurement::new(c, r, eta)
        })
        .collect()
}
