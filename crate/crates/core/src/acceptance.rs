//! The acceptance suite: numbered end-to-end checks with fixed tolerances.
//! `trapdamp selftest` runs it and writes the results; the integration
//! test prints one line per check.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::circuit::{
    characterize_resonance, impedance, suppression_eta, uniform_grid, CircuitParams, HemtModel, ImpedanceModel,
    ImpedanceTrace, Resistive, SwitchState, DEFAULT_PEAK_RESISTANCE,
};
use crate::error::Result;
use crate::inference::{fit_hemt_model, log_grid, synthetic_measurements, SwitchMeasurement};
use crate::io::{write_lineshape_csv, OutputSet};
use crate::particle::{
    damping_rate, instantaneous_amplitude, AxialIntegrator, AxialMode, DriveForce, ParticleEnsemble, TrapGeometry,
};
use crate::quantum::analysis::{fit_peak, fwhm_of_maximum, prominent_maxima, smoothed};
use crate::quantum::{
    level_dephasing_rate, lineshape_discrete, lineshape_monte_carlo, mean_axial_quanta, Lineshape, MonteCarloConfig,
};
use crate::spectra::{centered_grid, dip_fwhm, dip_spectrum, divider_source_impedance, impedance_from_s21, shunt_through_trace};

pub const DEFAULT_SEED: u64 = 42;

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub name: String,
    pub passed: bool,
    pub measured: String,
    pub target: String,
}

impl Check {
    fn new(id: &str, name: &str, passed: bool, measured: String, target: &str) -> Self {
        Check { id: id.into(), name: name.into(), passed, measured, target: target.into() }
    }

    fn error(id: &str, name: &str, err: crate::error::Error, target: &str) -> Self {
        Check::new(id, name, false, format!("error: {err}"), target)
    }

    /// `PASS 3 tank resonance: measured ... (target ...)`
    pub fn line(&self) -> String {
        format!(
            "{} {} {}: {} (target {})",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.target
        )
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn checked(id: &str, name: &str, target: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, measured)) => Check::new(id, name, passed, measured, target),
        Err(e) => Check::error(id, name, e, target),
    }
}

pub fn thermal_occupation() -> Check {
    checked("1", "thermal occupation", "10.42 ± 0.01", || {
        let n = mean_axial_quanta(0.1, 200e6)?;
        Ok(((n - 10.42).abs() <= 0.01, format!("nbar = {n:.4}")))
    })
}

pub fn source_impedance() -> Check {
    checked("2", "source impedance", "12.5 MΩ", || {
        let z = divider_source_impedance(0.2e-12, 100e-12, 50.0)?.z0_prime;
        Ok((rel(z, 12.5e6) < 1e-12, format!("Z0' = {z:.6e} Ω")))
    })
}

fn bare_tank() -> CircuitParams {
    CircuitParams {
        c_trap: 8.2e-12,
        l1: 55e-9,
        l2: 15e-9,
        r_loss: 83e3,
        c_amp: 0.0,
        c_tuning: 0.0,
        hemt: HemtModel::FITTED,
    }
}

pub fn tank_resonance() -> Check {
    checked("3", "tank resonance", "peak at 210.1 MHz ± 0.1%, Re Z = r_loss ± 0.1%", || {
        let p = bare_tank();
        let grid = uniform_grid(205e6, 215e6, 100_001)?;
        let (mut f_pk, mut r_pk) = (0.0, 0.0);
        for &f in &grid {
            let r = impedance(&p, SwitchState::Off, f)?.re;
            if r > r_pk {
                (f_pk, r_pk) = (f, r);
            }
        }
        let ok = rel(f_pk, 210.1e6) <= 1e-3 && rel(r_pk, p.r_loss) <= 1e-3;
        Ok((ok, format!("f = {:.4} MHz, Re Z = {:.1} Ω", f_pk * 1e-6, r_pk)))
    })
}

fn parallel_rlc_trace(r: f64, q: f64, f0: f64, n: usize) -> Result<(ImpedanceTrace, f64)> {
    let w0 = 2.0 * PI * f0;
    let l = r / (q * w0);
    let c = 1.0 / (w0 * w0 * l);
    let bw = f0 / q;
    let pts = uniform_grid(f0 - 4.0 * bw, f0 + 4.0 * bw, n)?
        .into_iter()
        .map(|f| {
            let w = 2.0 * PI * f;
            (f, 1.0 / Complex64::new(1.0 / r, w * c - 1.0 / (w * l)))
        })
        .collect();
    Ok((ImpedanceTrace::new(pts)?, l))
}

pub fn quality_factor_consistency() -> Check {
    checked("4", "R = QωL consistency", "(f0, Q, R) within 0.5%; R = 75.8 kΩ ± 0.5%", || {
        let mut worst: f64 = 0.0;
        for (r, q, f0) in [(50e3, 500.0, 200e6), (83e3, 800.0, 210.1e6), (10e3, 50.0, 172e6)] {
            let (tr, l) = parallel_rlc_trace(r, q, f0, 801)?;
            let s = characterize_resonance(&tr, l)?;
            worst = worst.max(rel(s.f0, f0)).max(rel(s.q, q)).max(rel(s.r_parallel, r));
        }
        let l = 70e-9;
        let (f0, q) = (215.3e6, 800.0);
        let r_true = q * 2.0 * PI * f0 * l;
        let (tr, _) = parallel_rlc_trace(r_true, q, f0, 801)?;
        let s = characterize_resonance(&tr, l)?;
        let r_fit = s.r_from_inductance().unwrap_or(f64::NAN);
        let ok = worst <= 5e-3 && rel(r_fit, 75.8e3) <= 5e-3;
        Ok((ok, format!("worst synthetic error {:.2e}, QωL from fit = {:.2} kΩ", worst, r_fit * 1e-3)))
    })
}

fn dip_width<Z: ImpedanceModel + ?Sized>(z: &Z, r: f64, f_z: f64, n: u32) -> Result<(f64, f64)> {
    let geom = TrapGeometry::default();
    let ens = ParticleEnsemble::electrons(n);
    let expected = n as f64 * damping_rate(&geom, &ens, r)? / (2.0 * PI);
    // keep f_z itself off the grid, where the electron branch is a short
    let grid = centered_grid(f_z + 0.37 * expected / 2000.0, 4.0 * expected, 4001)?;
    let s = dip_spectrum(z, &geom, Some(&ens), f_z, 4.2, &grid)?;
    Ok((dip_fwhm(&s)?, expected))
}

fn dip_width_on_tank(params: &CircuitParams, n: u32) -> Result<f64> {
    let f_z = params.off_state_resonance()?;
    let r = impedance(params, SwitchState::Off, f_z)?.re;
    Ok(dip_width(&params.at(SwitchState::Off), r, f_z, n)?.0)
}

pub fn dip_law() -> Check {
    checked("5", "dip law", "FWHM = Nγ/2π within 2%; width ratios 36:19:7.6 within 5%", || {
        // the law itself, for a detector that is resistive at f_z
        let mut worst: f64 = 0.0;
        for n in [1, 10, 100, 1500] {
            let (w, e) = dip_width(&Resistive(DEFAULT_PEAK_RESISTANCE), DEFAULT_PEAK_RESISTANCE, 200e6, n)?;
            worst = worst.max(rel(w, e));
        }
        // single-electron dips on the tank calibrated to each resistance
        let p = CircuitParams::default();
        let widths = [36e3, 19e3, 7.6e3]
            .iter()
            .map(|&r| dip_width_on_tank(&p.with_peak_resistance(r)?, 1))
            .collect::<Result<Vec<_>>>()?;
        let r1 = rel(widths[0] / widths[1], 36.0 / 19.0);
        let r2 = rel(widths[1] / widths[2], 19.0 / 7.6);
        let ok = worst <= 0.02 && r1 <= 0.05 && r2 <= 0.05;
        Ok((
            ok,
            format!(
                "worst width error {:.2e}; widths {:.3}:{:.3}:{:.3} Hz (ratio errors {:.1e}, {:.1e})",
                worst, widths[0], widths[1], widths[2], r1, r2
            ),
        ))
    })
}

pub fn shunt_through_round_trip() -> Check {
    checked("6", "shunt-through round trip", "identity to 1e-9 relative on 10⁴ points", || {
        let src = divider_source_impedance(0.2e-12, 100e-12, 50.0)?;
        let p = CircuitParams::default();
        let mut worst: f64 = 0.0;
        for state in [SwitchState::Off, SwitchState::On] {
            let tr = crate::circuit::impedance_sweep(&p, state, 150e6, 260e6, 10_000)?;
            let back = impedance_from_s21(&shunt_through_trace(&tr, &src), &src)?;
            for ((_, a), (_, b)) in tr.points().iter().zip(back.points()) {
                worst = worst.max((a - b).norm() / a.norm());
            }
        }
        Ok((worst <= 1e-9, format!("max relative error {worst:.2e}")))
    })
}

/// c_tuning points for the HEMT round trip: 400 log-spaced values 1-200 pF.
pub const HEMT_FIT_POINTS: usize = 400;
pub const HEMT_NOISE_SEEDS: u64 = 100;

pub fn hemt_round_trip(seed: u64) -> Check {
    checked("7", "HEMT fit round trip", "each parameter within 5% for 100 noise seeds", || {
        let p = CircuitParams::default();
        let f_z = 215.3e6;
        let truth = HemtModel::FITTED;
        let grid = log_grid(1e-12, 200e-12, HEMT_FIT_POINTS)?;
        let clean = synthetic_measurements(&p, &truth, &grid, f_z)?;
        let noise = Normal::new(0.0, 0.01).expect("valid normal");
        let mut worst = [0.0f64; 3];
        let mut failures = 0;
        for k in 0..HEMT_NOISE_SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let data: Vec<SwitchMeasurement> = clean
                .iter()
                .map(|m| SwitchMeasurement {
                    r_off_state: m.r_off_state * (1.0 + noise.sample(&mut rng)),
                    eta: m.eta * (1.0 + noise.sample(&mut rng)),
                    ..*m
                })
                .collect();
            let fit = fit_hemt_model(&data, &p, f_z)?;
            let err = [rel(fit.hemt.r_off, truth.r_off), rel(fit.hemt.r_on, truth.r_on), rel(fit.hemt.c_ds, truth.c_ds)];
            if err.iter().any(|e| *e > 0.05) || !fit.converged {
                failures += 1;
            }
            for i in 0..3 {
                worst[i] = worst[i].max(err[i]);
            }
        }
        Ok((
            failures == 0,
            format!(
                "worst errors r_off {:.2}%, r_on {:.2}%, c_ds {:.2}%; {failures} failing seeds",
                worst[0] * 100.0,
                worst[1] * 100.0,
                worst[2] * 100.0
            ),
        ))
    })
}

pub fn suppression_trend() -> Check {
    checked("8", "suppression trend", "η nondecreasing and saturating over 1-200 pF; η(180)/η(2.1) ≥ 5", || {
        let base = CircuitParams::default();
        let f_z = 215.3e6;
        let eta_at = |c: f64| -> Result<f64> {
            suppression_eta(&CircuitParams { c_tuning: c, ..base }.tuned_to(f_z)?, f_z)
        };
        let grid = log_grid(1e-12, 200e-12, 100)?;
        let etas = grid.iter().map(|&c| eta_at(c)).collect::<Result<Vec<_>>>()?;
        let monotone = etas.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9));
        // logarithmic slope over the top decade of the grid
        let top = (etas[etas.len() - 1] / etas[etas.len() - 12]).ln() / (grid[grid.len() - 1] / grid[grid.len() - 12]).ln();
        let bottom = (etas[11] / etas[0]).ln() / (grid[11] / grid[0]).ln();
        let saturating = top < 0.1 * bottom;
        let ratio = eta_at(180e-12)? / eta_at(2.1e-12)?;
        Ok((
            monotone && saturating && ratio >= 5.0,
            format!(
                "monotone {monotone}, d ln η/d ln C {bottom:.3} → {top:.4}, η(180 pF)/η(2.1 pF) = {ratio:.2}"
            ),
        ))
    })
}

pub fn dynamics_oracles() -> Check {
    checked("9", "dynamics oracles", "decay slope −γ/2 within 1%; steady amplitude F0/(mγω) within 1%", || {
        let mode = AxialMode::new(1.0, 2.0 * PI * 1e-3)?;
        let mass = 1.0;
        let traj = AxialIntegrator::new(mode, mass).run(1.0, 0.0, 5.0 / mode.gamma_z, 64)?;
        let (first, last) = (&traj[0], &traj[traj.len() - 1]);
        let slope = (instantaneous_amplitude(last, mode.f_z).ln() - instantaneous_amplitude(first, mode.f_z).ln())
            / (last.t - first.t);
        let e_slope = rel(slope, -mode.gamma_z / 2.0);

        let f0 = 1e-3;
        let driven = AxialIntegrator::new(mode, mass).with_drive(DriveForce::new(f0, mode.f_z)?);
        let traj = driven.run(0.0, 0.0, 10.0 / mode.gamma_z, 1)?;
        let amp = traj[traj.len() - 64..].iter().map(|p| p.z.abs()).fold(0.0, f64::max);
        let e_amp = rel(amp, f0 / (mass * mode.gamma_z * mode.omega()));
        Ok((
            e_slope <= 0.01 && e_amp <= 0.01,
            format!("slope error {:.2e}, amplitude error {:.2e}", e_slope, e_amp),
        ))
    })
}

/// Parameters of the two lineshape regimes.
pub const LINESHAPE_NBAR: f64 = 10.0;
pub const LINESHAPE_DELTA_C: f64 = 4.0;
pub const LINESHAPE_TRAJECTORIES: usize = 10_000;
pub const DISPERSIVE_GAMMA_OVER_2PI: f64 = 0.01;
pub const BROAD_GAMMA_OVER_2PI: f64 = 1.0;

/// Monte Carlo spectra of both regimes plus the discrete-peak model on the
/// dispersive grid.
#[derive(Debug, Clone)]
pub struct LineshapeRegimes {
    pub dispersive: Lineshape,
    pub broad: Lineshape,
    pub discrete: Lineshape,
}

pub fn lineshape_regimes(seed: u64) -> Result<LineshapeRegimes> {
    let cfg = |g: f64, t: f64| MonteCarloConfig {
        nbar: LINESHAPE_NBAR,
        delta_c: LINESHAPE_DELTA_C,
        gamma_z: 2.0 * PI * g,
        t_total: t,
        n_traj: LINESHAPE_TRAJECTORIES,
        seed,
    };
    let dispersive = lineshape_monte_carlo(&cfg(DISPERSIVE_GAMMA_OVER_2PI, 256.0))?;
    let broad = lineshape_monte_carlo(&cfg(BROAD_GAMMA_OVER_2PI, 16.0))?;
    let discrete = lineshape_discrete(
        LINESHAPE_NBAR,
        LINESHAPE_DELTA_C,
        2.0 * PI * DISPERSIVE_GAMMA_OVER_2PI,
        dispersive.offsets(),
    )?;
    Ok(LineshapeRegimes { dispersive, broad, discrete })
}

/// Lorentzian fits to the first `count` axial-level peaks of the dispersive spectrum.
pub fn dispersive_peaks(shape: &Lineshape, count: u32) -> Result<Vec<crate::quantum::analysis::PeakFit>> {
    let gamma = 2.0 * PI * DISPERSIVE_GAMMA_OVER_2PI;
    (0..count)
        .map(|n| {
            let centre = (n as f64 + 0.5) * LINESHAPE_DELTA_C;
            let hwhm = level_dephasing_rate(n, LINESHAPE_NBAR, gamma) / (2.0 * PI);
            fit_peak(shape, centre, 0.375 * LINESHAPE_DELTA_C, hwhm)
        })
        .collect()
}

/// Moving-average half width, in bins, used to read the broad envelope.
const ENVELOPE_SMOOTHING: usize = 8;

pub fn lineshape_checks(r: &LineshapeRegimes) -> Vec<Check> {
    let mut out = Vec::new();
    let peaks = dispersive_peaks(&r.dispersive, 4);
    out.push(match &peaks {
        Ok(p) => {
            let gaps: Vec<f64> = p.windows(2).map(|w| w[1].center - w[0].center).collect();
            let ok = gaps.iter().all(|g| (g - 4.0).abs() <= 0.4);
            let text = gaps.iter().map(|g| format!("{g:.3}")).collect::<Vec<_>>().join(", ");
            Check::new("10a-spacing", "dispersive peak spacing", ok, format!("spacings {text} Hz"), "4.0 ± 0.4 Hz")
        }
        Err(e) => Check::new("10a-spacing", "dispersive peak spacing", false, format!("error: {e}"), "4.0 ± 0.4 Hz"),
    });
    out.push(match &peaks {
        Ok(p) => {
            // the three best-resolved levels
            let ratios: Vec<f64> = p[..3].windows(2).map(|w| w[1].area / w[0].area).collect();
            let ok = ratios.iter().all(|q| (q - 0.91).abs() <= 0.05);
            let text = ratios.iter().map(|q| format!("{q:.3}")).collect::<Vec<_>>().join(", ");
            Check::new("10a-ratio", "consecutive weight ratio", ok, format!("ratios {text} (n_z = 0..2)"), "0.91 ± 0.05")
        }
        Err(e) => Check::new("10a-ratio", "consecutive weight ratio", false, format!("error: {e}"), "0.91 ± 0.05"),
    });
    out.push(match r.dispersive.l1_distance(&r.discrete) {
        Ok(d) => Check::new("10a-l1", "Monte Carlo vs discrete model", d < 0.05, format!("L1 = {d:.4}"), "L1 < 0.05"),
        Err(e) => Check::error("10a-l1", "Monte Carlo vs discrete model", e, "L1 < 0.05"),
    });

    let envelope = smoothed(&r.broad, ENVELOPE_SMOOTHING);
    out.push(match &envelope {
        Ok(env) => {
            let maxima = prominent_maxima(env, 0.05);
            let skew = r.broad.skewness();
            Check::new(
                "10b",
                "broad single asymmetric envelope",
                maxima.len() == 1 && skew > 0.0,
                format!("{} prominent maxima, skewness {skew:.3}", maxima.len()),
                "one maximum, skewness > 0",
            )
        }
        Err(e) => Check::new("10b", "broad single asymmetric envelope", false, format!("error: {e}"), "one maximum"),
    });

    let widths = envelope
        .and_then(|env| fwhm_of_maximum(&env))
        .and_then(|wb| Ok((wb, peaks?.first().map(|p| p.fwhm()).unwrap_or(f64::NAN))));
    out.push(match widths {
        Ok((wb, wa)) => Check::new(
            "10c",
            "motional narrowing",
            wb / wa >= 50.0,
            format!("FWHM broad {wb:.2} Hz / FWHM n_z=0 {wa:.4} Hz = {:.1}", wb / wa),
            "ratio ≥ 50",
        ),
        Err(e) => Check::new("10c", "motional narrowing", false, format!("error: {e}"), "ratio ≥ 50"),
    });

    let (ma, mb) = (r.dispersive.mean_offset(), r.broad.mean_offset());
    out.push(Check::new(
        "10d",
        "first moment",
        (ma - 42.0).abs() <= 1.0 && (mb - 42.0).abs() <= 1.0,
        format!("mean offsets {ma:.3} Hz (dispersive), {mb:.3} Hz (broad)"),
        "42 ± 1 Hz",
    ));
    out
}

/// Checks 1-10 and the files they leave behind.
pub fn suite(seed: u64) -> (Vec<Check>, OutputSet) {
    let mut checks = vec![
        thermal_occupation(),
        source_impedance(),
        tank_resonance(),
        quality_factor_consistency(),
        dip_law(),
        shunt_through_round_trip(),
        hemt_round_trip(seed),
        suppression_trend(),
        dynamics_oracles(),
    ];
    let mut files = OutputSet::new();
    match lineshape_regimes(seed) {
        Ok(r) => {
            checks.extend(lineshape_checks(&r));
            for (name, shape) in [
                ("lineshape_dispersive.csv", &r.dispersive),
                ("lineshape_broad.csv", &r.broad),
                ("lineshape_discrete.csv", &r.discrete),
            ] {
                if let Err(e) = files.add_csv(name, |w| write_lineshape_csv(w, shape)) {
                    checks.push(Check::error("10", name, e, "written"));
                }
            }
        }
        Err(e) => checks.push(Check::error("10", "lineshape regimes", e, "spectra computed")),
    }
    (checks, files)
}

fn render(checks: &[Check], files: &mut OutputSet) -> Result<()> {
    files.add_json("acceptance.json", checks)?;
    let text: String = checks.iter().map(|c| c.line() + "\n").collect();
    files.add("acceptance.txt", text.into_bytes());
    Ok(())
}

/// Checks 1-10 with their report files, as written by `selftest`. Check 11
/// is the comparison of two such runs.
pub fn selftest(seed: u64) -> Result<(Vec<Check>, OutputSet)> {
    let (checks, mut files) = suite(seed);
    render(&checks, &mut files)?;
    Ok((checks, files))
}

/// Check 11 from the outputs of two runs: same file names, same bytes.
pub fn determinism(first: &[(String, Vec<u8>)], second: &[(String, Vec<u8>)]) -> Check {
    let identical = first == second;
    let total: usize = first.iter().map(|(_, b)| b.len()).sum();
    let differing: Vec<&str> = first
        .iter()
        .zip(second)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.as_str())
        .collect();
    let measured = if identical {
        format!("{} files, {total} bytes identical", first.len())
    } else if first.len() != second.len() {
        format!("{} vs {} files", first.len(), second.len())
    } else {
        format!("differing: {}", differing.join(", "))
    };
    Check::new("11", "determinism", identical, measured, "byte-identical repeat")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_checks_pass() {
        for c in [
            thermal_occupation(),
            source_impedance(),
            tank_resonance(),
            quality_factor_consistency(),
            dip_law(),
            shunt_through_round_trip(),
            suppression_trend(),
            dynamics_oracles(),
        ] {
            assert!(c.passed, "{}", c.line());
        }
    }

    #[test]
    fn line_format() {
        let c = Check::new("3", "x", false, "m".into(), "t");
        assert_eq!(c.line(), "FAIL 3 x: m (target t)");
    }
}
