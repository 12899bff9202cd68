//! Command-line front end. Every subcommand writes its files plus a
//! `manifest.json` into `--out`.
//!
//! Exit codes: 0 success, 1 usage, 2 configuration or input, 3 numerical
//! failure. Failures print one `error code=... msg=...` line to stderr.

use std::ffi::OsString;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::acceptance;
use crate::circuit::{
    characterize_resonance, impedance, impedance_sweep, CircuitParams, ImpedanceTrace, ResonanceSummary, SwitchState,
};
use crate::config::{GridSpec, LineshapeConfig, RunConfig};
use crate::error::{Error, Result};
use crate::inference::{fit_hemt_model, log_grid, scan_ctuning, switch_response, synthetic_measurements, SwitchMeasurement};
use crate::io::{self, OutputSet};
use crate::particle::damping_rate;
use crate::quantum::{dispersive_ratio, lineshape_discrete, lineshape_monte_carlo, MonteCarloConfig, DISPERSIVE_THRESHOLD};
use crate::spectra::{
    centered_grid, dip_fwhm, dip_spectrum, divider_source_impedance, impedance_from_s21, shunt_through_s21,
    SourceImpedance,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const THREADS_ENV: &str = "TRAPDAMP_THREADS";

#[derive(Debug, Parser)]
#[command(name = "trapdamp", version, about = "Detection-circuit, damping-switch and lineshape models for a one-electron Penning trap")]
struct Cli {
    /// JSON run configuration; defaults are used for anything missing.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Frequency sweep `f_start,f_stop,n` in Hz.
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Restrict to one switch state.
    #[arg(long, global = true)]
    switch: Option<SwitchState>,
    /// Input data file for `invert` and `fit-hemt`.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Re[Z], Im[Z] sweeps and resonance fits for the switch states.
    Impedance,
    /// Noise spectra with particle dips for each configured resistance.
    Dip,
    /// Forward shunt-through transmission of the circuit.
    S21,
    /// Impedance recovered from a transmission trace (`--input`).
    Invert,
    /// Monte Carlo and discrete-peak cyclotron lineshapes.
    Lineshape,
    /// Fit the switch model to (R, η) data (`--input`, or synthetic data).
    FitHemt,
    /// Tabulate R and η against the tuning capacitor and recommend one.
    ScanCtuning,
    /// Run the acceptance suite.
    Selftest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Impedance => "impedance",
            Command::Dip => "dip",
            Command::S21 => "s21",
            Command::Invert => "invert",
            Command::Lineshape => "lineshape",
            Command::FitHemt => "fit-hemt",
            Command::ScanCtuning => "scan-ctuning",
            Command::Selftest => "selftest",
        }
    }
}

/// What a subcommand produced: files, the exit code, and extra inputs to
/// record in the manifest.
struct Outcome {
    files: OutputSet,
    code: i32,
    extra: serde_json::Value,
}

impl Outcome {
    fn ok(files: OutputSet) -> Self {
        Outcome { files, code: EXIT_OK, extra: serde_json::Value::Null }
    }
}

fn report(code: &str, msg: &str) {
    eprintln!("error code={code} msg={}", msg.replace(['\n', '\r'], " "));
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Singular(_) | Error::FitFailure { .. } | Error::Analysis(_) | Error::Io(_) => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            eprint!("{e}");
            report("usage", &e.kind().to_string());
            return EXIT_USAGE;
        }
    };
    if let Err(e) = limit_threads() {
        report(e.code(), &e.to_string());
        return EXIT_CONFIG;
    }
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            report(e.code(), &e.to_string());
            return EXIT_CONFIG;
        }
    };
    if matches!(cli.command, Command::Invert) && cli.input.is_none() {
        report("usage", "invert needs --input with a transmission trace");
        return EXIT_USAGE;
    }

    let result = match cli.command {
        Command::Impedance => cmd_impedance(&cfg, cli.switch),
        Command::Dip => cmd_dip(&cfg),
        Command::S21 => cmd_s21(&cfg, cli.switch),
        Command::Invert => cmd_invert(&cfg, cli.input.as_deref().expect("checked above")),
        Command::Lineshape => cmd_lineshape(&cfg),
        Command::FitHemt => cmd_fit_hemt(&cfg, cli.input.as_deref()),
        Command::ScanCtuning => cmd_scan(&cfg),
        Command::Selftest => cmd_selftest(&cfg),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            report(e.code(), &e.to_string());
            return exit_code(&e);
        }
    };

    let inputs = json!({
        "config": cfg,
        "config_path": cli.config,
        "switch": cli.switch,
        "input": cli.input,
        "details": outcome.extra,
    });
    match outcome.files.commit(&cli.out, cli.command.name(), cfg.seed, inputs) {
        Ok(m) => {
            println!("{}: wrote {} files and {} to {}", cli.command.name(), m.outputs.len(), io::MANIFEST_FILE, cli.out.display());
            outcome.code
        }
        Err(e) => {
            report(e.code(), &e.to_string());
            EXIT_NUMERICAL
        }
    }
}

fn limit_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    // A pool may already exist when called repeatedly in one process; the
    // first setting wins.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(g) = &cli.grid {
        cfg.grid = Some(g.parse::<GridSpec>()?);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn states(filter: Option<SwitchState>) -> Vec<SwitchState> {
    filter.map_or_else(|| vec![SwitchState::Off, SwitchState::On], |s| vec![s])
}

fn state_name(s: SwitchState) -> &'static str {
    match s {
        SwitchState::Off => "off",
        SwitchState::On => "on",
    }
}

/// Fit the resonance seen in `coarse` on a finer sweep around its peak.
fn resonance_near_peak(params: &CircuitParams, state: SwitchState, coarse: &ImpedanceTrace) -> Result<ResonanceSummary> {
    let f = coarse.freqs();
    let r = coarse.real_parts();
    let imax = (0..r.len()).max_by(|&a, &b| r[a].total_cmp(&r[b])).expect("nonempty trace");
    if imax == 0 || imax == r.len() - 1 {
        return Err(Error::Analysis(format!("{} state: peak at the edge of the sweep", state_name(state))));
    }
    let step = f[1] - f[0];
    let half = 0.5 * r[imax];
    let lo = (0..imax).rev().find(|&i| r[i] < half).map_or(f[0], |i| f[i]);
    let hi = (imax..r.len()).find(|&i| r[i] < half).map_or(f[r.len() - 1], |i| f[i]);
    let width = (hi - lo).max(2.0 * step);
    let fine = impedance_sweep(params, state, f[imax] - 2.0 * width, f[imax] + 2.0 * width, 801)?;
    characterize_resonance(&fine, params.l_total())
}

fn cmd_impedance(cfg: &RunConfig, filter: Option<SwitchState>) -> Result<Outcome> {
    let params = cfg.circuit.params()?;
    let g = cfg.grid();
    let mut files = OutputSet::new();
    for state in states(filter) {
        let trace = impedance_sweep(&params, state, g.f_start, g.f_stop, g.n)?;
        let name = state_name(state);
        files.add_csv(format!("impedance_{name}.csv"), |w| io::write_impedance_csv(w, &trace))?;
        let summary = resonance_near_peak(&params, state, &trace)?;
        println!(
            "{name}: f0 = {:.4} MHz, Q = {:.1}, R = {:.1} kΩ",
            summary.f0 * 1e-6,
            summary.q,
            summary.r_parallel * 1e-3
        );
        files.add_json(format!("resonance_{name}.json"), &summary)?;
    }
    Ok(Outcome { extra: json!({ "r_loss_ohm": params.r_loss }), ..Outcome::ok(files) })
}

fn cmd_dip(cfg: &RunConfig) -> Result<Outcome> {
    let base = cfg.circuit.params()?;
    let mut files = OutputSet::new();
    let mut rows = Vec::new();
    for &r_peak in &cfg.dip.resistances_ohm {
        let params = base.with_peak_resistance(r_peak)?;
        let f_z = params.off_state_resonance()?;
        let r = impedance(&params, SwitchState::Off, f_z)?.re;
        for &n in &cfg.dip.particle_counts {
            let ens = cfg.particles.with_count(n);
            let gamma = damping_rate(&cfg.geometry, &ens, r)?;
            let expected = n as f64 * gamma / (2.0 * PI);
            let half_span = cfg.dip.half_span_hz.unwrap_or(20.0 * expected);
            let step = 2.0 * half_span / (cfg.dip.points - 1) as f64;
            // the electron branch shorts the circuit exactly at f_z
            let grid = centered_grid(f_z + 0.37 * step, half_span, cfg.dip.points)?;
            let spec = dip_spectrum(&params.at(SwitchState::Off), &cfg.geometry, Some(&ens), f_z, cfg.temperature_k, &grid)?;
            let fwhm = dip_fwhm(&spec)?;
            files.add_csv(format!("dip_r{r_peak:.0}_n{n}.csv"), |w| io::write_spectrum_csv(w, &spec))?;
            println!("R = {:.1} kΩ, N = {n}: FWHM {fwhm:.4} Hz (Nγ/2π = {expected:.4} Hz)", r * 1e-3);
            rows.push(json!({
                "r_ohm": r,
                "n": n,
                "f_z_hz": f_z,
                "gamma_z_per_s": gamma,
                "expected_fwhm_hz": expected,
                "fwhm_hz": fwhm,
            }));
        }
    }
    files.add_json("dip_summary.json", &rows)?;
    Ok(Outcome::ok(files))
}

fn source(cfg: &RunConfig) -> Result<SourceImpedance> {
    let s = &cfg.shunt_through;
    divider_source_impedance(s.c_couple, s.c_shunt, s.z_line_ohm)
}

fn cmd_s21(cfg: &RunConfig, filter: Option<SwitchState>) -> Result<Outcome> {
    let params = cfg.circuit.params()?;
    let src = source(cfg)?;
    let grid = cfg.grid().points()?;
    let mut files = OutputSet::new();
    let mut flags = serde_json::Map::new();
    for state in states(filter) {
        let name = state_name(state);
        let tank = params.at(state);
        let s21 = shunt_through_s21(&tank, &src, &grid)?;
        let z = ImpedanceTrace::new(
            grid.iter().map(|&f| Ok((f, impedance(&params, state, f)?))).collect::<Result<Vec<_>>>()?,
        )?;
        if s21.weak_coupling_violated {
            println!("{name}: |Z| is not small against Z0'/2; the weak-coupling reading of S21 does not apply");
        }
        flags.insert(name.into(), json!(s21.weak_coupling_violated));
        files.add_csv(format!("s21_{name}.csv"), |w| io::write_transmission_csv(w, &s21))?;
        files.add_csv(format!("impedance_{name}.csv"), |w| io::write_impedance_csv(w, &z))?;
    }
    files.add_json("s21_summary.json", &json!({ "z0_prime_ohm": src.z0_prime, "weak_coupling_violated": flags }))?;
    Ok(Outcome::ok(files))
}

fn read_input(path: &Path) -> Result<(Vec<u8>, String)> {
    let bytes = fs::read(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let digest = io::sha256_hex(&bytes);
    Ok((bytes, digest))
}

fn as_input_error(e: Error) -> Error {
    match e {
        Error::Csv(_) | Error::Io(_) | Error::InvalidParameter(_) => Error::Config(e.to_string()),
        other => other,
    }
}

fn cmd_invert(cfg: &RunConfig, input: &Path) -> Result<Outcome> {
    let (bytes, digest) = read_input(input)?;
    let trace = io::read_transmission_csv(bytes.as_slice()).map_err(as_input_error)?;
    let z = impedance_from_s21(&trace, &source(cfg)?)?;
    let mut files = OutputSet::new();
    files.add_csv("impedance.csv", |w| io::write_impedance_csv(w, &z))?;
    Ok(Outcome { extra: json!({ "input_sha256": digest }), ..Outcome::ok(files) })
}

fn cmd_lineshape(cfg: &RunConfig) -> Result<Outcome> {
    let l = &cfg.lineshape;
    let mut files = OutputSet::new();
    let mut rows = Vec::new();
    for &g in &l.gamma_z_over_2pi_hz {
        let gamma_z = LineshapeConfig::gamma_z(g);
        let mc = MonteCarloConfig {
            nbar: l.nbar,
            delta_c: l.delta_c_hz,
            gamma_z,
            t_total: l.duration_for(g),
            n_traj: l.trajectories,
            seed: cfg.seed,
        };
        let shape = lineshape_monte_carlo(&mc)?;
        let discrete = lineshape_discrete(l.nbar, l.delta_c_hz, gamma_z, shape.offsets())?;
        let ratio = if l.delta_c_hz > 0.0 { dispersive_ratio(l.nbar, gamma_z, l.delta_c_hz)? } else { f64::INFINITY };
        let tag = format!("g{g}");
        files.add_csv(format!("lineshape_{tag}_mc.csv"), |w| io::write_lineshape_csv(w, &shape))?;
        files.add_csv(format!("lineshape_{tag}_discrete.csv"), |w| io::write_lineshape_csv(w, &discrete))?;
        let mut warnings = shape.warnings.clone();
        warnings.extend(discrete.warnings.iter().cloned());
        println!(
            "γ/2π = {g} Hz: mean offset {:.3} Hz, nbar γ/(2π δ_c) = {ratio:.3}",
            shape.mean_offset()
        );
        rows.push(json!({
            "gamma_z_over_2pi_hz": g,
            "duration_s": mc.t_total,
            "trajectories": mc.n_traj,
            "dispersive_ratio": ratio,
            "strongly_dispersive": ratio < DISPERSIVE_THRESHOLD,
            "mean_offset_hz": shape.mean_offset(),
            "expected_mean_offset_hz": (l.nbar + 0.5) * l.delta_c_hz,
            "warnings": warnings,
        }));
    }
    files.add_json("lineshape_summary.json", &rows)?;
    Ok(Outcome::ok(files))
}

fn design_grid(cfg: &RunConfig) -> Result<Vec<f64>> {
    let d = &cfg.design;
    log_grid(d.c_tuning_min_pf * 1e-12, d.c_tuning_max_pf * 1e-12, d.points)
}

/// Measurement noise on synthetic fit input, relative.
const SYNTHETIC_NOISE: f64 = 0.01;

fn synthetic_fit_input(cfg: &RunConfig, params: &CircuitParams) -> Result<Vec<SwitchMeasurement>> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let clean = synthetic_measurements(params, &params.hemt, &design_grid(cfg)?, cfg.design.f_eval_hz)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, SYNTHETIC_NOISE).expect("valid normal");
    Ok(clean
        .into_iter()
        .map(|m| SwitchMeasurement {
            r_off_state: m.r_off_state * (1.0 + noise.sample(&mut rng)),
            eta: m.eta * (1.0 + noise.sample(&mut rng)),
            ..m
        })
        .collect())
}

fn cmd_fit_hemt(cfg: &RunConfig, input: Option<&Path>) -> Result<Outcome> {
    let params = cfg.circuit.params()?;
    let mut files = OutputSet::new();
    let (data, extra) = match input {
        Some(path) => {
            let (bytes, digest) = read_input(path)?;
            let data = io::read_switch_measurements(bytes.as_slice()).map_err(as_input_error)?;
            (data, json!({ "input_sha256": digest }))
        }
        None => {
            let data = synthetic_fit_input(cfg, &params)?;
            files.add_csv("measurements.csv", |w| io::write_switch_measurements(w, &data))?;
            (data, json!({ "synthetic_noise": SYNTHETIC_NOISE }))
        }
    };
    for m in data.iter().filter(|m| m.is_suspect()) {
        println!("warning: η = {} < 1 at {} pF; the switch increases damping there", m.eta, m.c_tuning * 1e12);
    }
    let f = cfg.design.f_eval_hz;
    let fit = fit_hemt_model(&data, &params, f).map_err(as_input_error)?;
    let curve = design_grid(cfg)?
        .into_iter()
        .map(|c| {
            let (r, eta) = switch_response(&params, &fit.hemt, c, f)?;
            SwitchMeasurement::new(c, r, eta)
        })
        .collect::<Result<Vec<_>>>()?;
    files.add_json("fit.json", &fit)?;
    files.add_csv("fit_curve.csv", |w| io::write_switch_measurements(w, &curve))?;
    println!(
        "r_off = {:.4e} Ω, r_on = {:.4} Ω, c_ds = {:.4e} F, residual {:.3e}, converged {}",
        fit.hemt.r_off, fit.hemt.r_on, fit.hemt.c_ds, fit.residual, fit.converged
    );
    let code = if fit.converged {
        EXIT_OK
    } else {
        report("fit_failure", "switch model fit did not converge; best parameters written");
        EXIT_NUMERICAL
    };
    Ok(Outcome { files, code, extra })
}

fn cmd_scan(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.circuit.params()?;
    let scan = scan_ctuning(&params, cfg.design.f_eval_hz, &design_grid(cfg)?, &cfg.design.constraints)?;
    let mut files = OutputSet::new();
    files.add_csv("scan.csv", |w| io::write_scan_csv(w, &scan.rows))?;
    files.add_json(
        "recommendation.json",
        &json!({
            "recommended_c_tuning_pf": scan.recommended.map(|c| c * 1e12),
            "satisfiable": scan.satisfiable,
            "pareto_best": scan.pareto_best,
            "constraints": cfg.design.constraints,
        }),
    )?;
    match scan.recommended {
        Some(c) => println!("recommended C_tuning = {:.3} pF", c * 1e12),
        None => println!("no grid point meets the constraints"),
    }
    Ok(Outcome::ok(files))
}

fn cmd_selftest(cfg: &RunConfig) -> Result<Outcome> {
    let (checks, files) = acceptance::selftest(cfg.seed)?;
    for c in &checks {
        println!("{}", c.line());
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let code = if failed == 0 {
        EXIT_OK
    } else {
        report("acceptance", &format!("{failed} of {} checks failed", checks.len()));
        EXIT_NUMERICAL
    };
    Ok(Outcome { files, code, extra: serde_json::Value::Null })
}
