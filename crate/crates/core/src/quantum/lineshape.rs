//! Cyclotron lineshapes under detector backaction.
//!
//! The cyclotron frequency is shifted by `(n_z + ½) δ_c` and `n_z` wanders
//! thermally. When the wandering is slow against the shift per quantum, the
//! line splits into one Lorentzian per axial level ([`lineshape_discrete`]).
//! [`lineshape_monte_carlo`] simulates the spectral diffusion directly and
//! covers both limits.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::jump::AxialJumpProcess;
use super::levels::{dispersive_ratio, thermal_cutoff, thermal_weight_unchecked};
use crate::error::{Error, Result};

/// Fraction of the thermal weight a lineshape grid has to hold.
pub const COVERAGE: f64 = 0.999;

/// Probability density over offsets from the unperturbed cyclotron frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Lineshape {
    offsets: Vec<f64>,
    density: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Lineshape {
    pub fn new(offsets: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if offsets.len() < 2 || offsets.len() != density.len() {
            return Err(Error::invalid("lineshape needs matching columns with at least two points"));
        }
        if offsets.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("lineshape offsets must be strictly increasing"));
        }
        if density.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
            return Err(Error::invalid("lineshape density must be finite and non-negative"));
        }
        Ok(Lineshape { offsets, density, warnings: Vec::new() })
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    fn trapezoid(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        self.offsets
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(f, d)| 0.5 * (f[1] - f[0]) * (g(f[0], d[0]) + g(f[1], d[1])))
            .sum()
    }

    /// ∫ density df (trapezoid rule).
    pub fn integral(&self) -> f64 {
        self.trapezoid(|_, d| d)
    }

    /// First moment ∫ f density df / ∫ density df.
    pub fn mean_offset(&self) -> f64 {
        self.trapezoid(|f, d| f * d) / self.integral()
    }

    /// Central moment of order `k`, normalized by the integral.
    pub fn central_moment(&self, k: i32) -> f64 {
        let m = self.mean_offset();
        self.trapezoid(|f, d| (f - m).powi(k) * d) / self.integral()
    }

    /// Standardized third moment.
    pub fn skewness(&self) -> f64 {
        self.central_moment(3) / self.central_moment(2).powf(1.5)
    }

    /// ∫ |a − b| df between two lineshapes on the same grid.
    pub fn l1_distance(&self, other: &Lineshape) -> Result<f64> {
        if self.offsets != other.offsets {
            return Err(Error::invalid("L1 distance needs identical offset grids"));
        }
        let diff: Vec<f64> = self.density.iter().zip(&other.density).map(|(a, b)| (a - b).abs()).collect();
        Ok(Lineshape { offsets: self.offsets.clone(), density: diff, warnings: Vec::new() }.integral())
    }

    /// Copy rescaled to unit integral.
    pub fn normalized(mut self) -> Result<Self> {
        let area = self.integral();
        if !(area > 0.0) {
            return Err(Error::Analysis("lineshape has zero area".into()));
        }
        self.density.iter_mut().for_each(|d| *d /= area);
        Ok(self)
    }
}

fn check_rates(nbar: f64, delta_c: f64, gamma_z: f64) -> Result<()> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::invalid("nbar must be non-negative"));
    }
    if !(gamma_z >= 0.0 && gamma_z.is_finite()) {
        return Err(Error::invalid("gamma_z must be non-negative"));
    }
    if !(delta_c >= 0.0 && delta_c.is_finite()) {
        return Err(Error::invalid("delta_c must be non-negative"));
    }
    Ok(())
}

/// Decay rate of the cyclotron coherence while the axial level is `n`:
/// the total rate of leaving level `n`.
pub fn level_dephasing_rate(n: u32, nbar: f64, gamma_z: f64) -> f64 {
    let n = n as f64;
    gamma_z * ((nbar + 1.0) * n + nbar * (n + 1.0))
}

/// Sum of thermally weighted Lorentzians, one per axial level `n`, centred
/// at `(n + ½) δ_c` with half width `Γ_n / 2π` in Hz.
///
/// The result is normalized on `grid`, which must hold the centres of the
/// levels carrying [`COVERAGE`] of the weight.
pub fn lineshape_discrete(nbar: f64, delta_c: f64, gamma_z: f64, grid: &[f64]) -> Result<Lineshape> {
    check_rates(nbar, delta_c, gamma_z)?;
    if grid.len() < 2 {
        return Err(Error::invalid("lineshape grid needs at least two points"));
    }
    let n_cov = thermal_cutoff(nbar, COVERAGE);
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    let top = (n_cov as f64 + 0.5) * delta_c;
    if 0.5 * delta_c < lo || top > hi {
        return Err(Error::Domain(format!(
            "grid [{lo}, {hi}] Hz does not hold 0.999 of the thermal weight (needs {} to {top} Hz)",
            0.5 * delta_c
        )));
    }
    // Far more levels than the coverage bound so the sum is converged.
    let n_sum = thermal_cutoff(nbar, 1.0 - 1e-12).max(n_cov);
    let mut density = vec![0.0; grid.len()];
    let step = grid[1] - grid[0];
    for n in 0..=n_sum {
        let w = thermal_weight_unchecked(n, nbar);
        let center = (n as f64 + 0.5) * delta_c;
        let hwhm = level_dephasing_rate(n, nbar, gamma_z) / (2.0 * PI);
        if hwhm < 0.5 * step {
            // Narrower than the grid: deposit the weight in the nearest bin.
            if center < lo || center > hi {
                continue;
            }
            let i = grid.partition_point(|&f| f < center).min(grid.len() - 1);
            let i = if i > 0 && (center - grid[i - 1]) < (grid[i] - center) { i - 1 } else { i };
            let width = if i + 1 < grid.len() { grid[i + 1] - grid[i] } else { grid[i] - grid[i - 1] };
            density[i] += w / width;
            continue;
        }
        for (d, &f) in density.iter_mut().zip(grid) {
            let x = f - center;
            *d += w * hwhm / PI / (hwhm * hwhm + x * x);
        }
    }
    let mut shape = Lineshape::new(grid.to_vec(), density)?.normalized()?;
    if delta_c > 0.0 && dispersive_ratio(nbar, gamma_z, delta_c)? >= 1.0 {
        shape
            .warnings
            .push("not in the strongly dispersive regime; the discrete-peak model is unreliable".into());
    }
    Ok(shape)
}

/// Inputs of the spectral-diffusion simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub nbar: f64,
    pub delta_c: f64,
    /// Axial damping rate, 1/s.
    pub gamma_z: f64,
    /// Length of each trajectory; sets the frequency resolution 1/t_total.
    pub t_total: f64,
    pub n_traj: usize,
    pub seed: u64,
}

/// Trajectories per parallel work unit. Fixed so that the summation order,
/// and hence every output bit, is independent of the thread count.
const CHUNK: usize = 64;

fn is_5_smooth(mut n: usize) -> bool {
    for p in [2, 3, 5] {
        while n.is_multiple_of(p) {
            n /= p;
        }
    }
    n == 1
}

/// Sampling plan: number of samples and the demodulation frequency.
fn sampling_plan(cfg: &MonteCarloConfig) -> (usize, f64) {
    let t = cfg.t_total;
    let mean = (cfg.nbar + 0.5) * cfg.delta_c;
    let shift = (mean * t).round() / t;
    let top = (thermal_cutoff(cfg.nbar, COVERAGE) as f64 + 0.5) * cfg.delta_c;
    let half_band = shift.max(top - shift) + 2.0 * cfg.delta_c + 32.0 / t;
    let mut n = (2.0 * half_band * t).ceil() as usize;
    n += n % 2;
    while !is_5_smooth(n) {
        n += 2;
    }
    (n, shift)
}

/// Demodulated, windowed `exp(iφ(t))` of one trajectory written into `buf`.
fn fill_trajectory(
    cfg: &MonteCarloConfig,
    process: &AxialJumpProcess,
    shift: f64,
    window: &[f64],
    rng: &mut ChaCha8Rng,
    buf: &mut [Complex64],
) {
    let n_samples = buf.len();
    let dt = cfg.t_total / n_samples as f64;
    let mut n = process.sample_stationary(rng);
    // demodulated phase at the last jump, and the time of that jump
    let mut psi_anchor = 0.0;
    let mut t_anchor = 0.0;
    let mut next = process.next_jump(n, rng);
    let freq = |n: u32| cfg.delta_c * (n as f64 + 0.5) - shift;

    let mut k = 0;
    while k < n_samples {
        let t_k = k as f64 * dt;
        // Apply every jump that happens before this sample.
        while let Some((t_jump, to)) = next {
            if t_jump > t_k {
                break;
            }
            psi_anchor += 2.0 * PI * freq(n) * (t_jump - t_anchor);
            t_anchor = t_jump;
            n = to;
            next = process.next_jump(n, rng).map(|(w, to)| (t_jump + w, to));
        }
        // Between jumps the phase advances linearly; rotate incrementally and
        // re-anchor with an exact evaluation at the first sample of a segment.
        let seg_end = match next {
            Some((t_jump, _)) => ((t_jump / dt).ceil() as usize).min(n_samples),
            None => n_samples,
        };
        let seg_end = seg_end.max(k + 1);
        let mut z = Complex64::from_polar(1.0, psi_anchor + 2.0 * PI * freq(n) * (t_k - t_anchor));
        let rot = Complex64::from_polar(1.0, 2.0 * PI * freq(n) * dt);
        for j in k..seg_end {
            buf[j] = z * window[j];
            z *= rot;
        }
        k = seg_end;
    }
}

/// Spectrum of `exp(iφ(t))` with `φ = 2π δ_c ∫ (n_z + ½) dt` and `n_z`
/// following the thermal jump process.
///
/// Each trajectory starts from a stationary level, is Hann-windowed and
/// Fourier transformed; the periodograms are averaged and normalized. The
/// offset grid has spacing `1/t_total`. Output is bit-identical for a given
/// configuration regardless of how many threads run it.
pub fn lineshape_monte_carlo(cfg: &MonteCarloConfig) -> Result<Lineshape> {
    check_rates(cfg.nbar, cfg.delta_c, cfg.gamma_z)?;
    if cfg.n_traj == 0 {
        return Err(Error::invalid("need at least one trajectory"));
    }
    if !(cfg.t_total > 0.0 && cfg.t_total.is_finite()) {
        return Err(Error::invalid("t_total must be positive"));
    }
    let process = AxialJumpProcess::new(cfg.nbar, cfg.gamma_z)?;
    let (n_samples, shift) = sampling_plan(cfg);
    if n_samples > 1 << 24 {
        return Err(Error::invalid(format!("{n_samples} samples per trajectory is too many; shorten t_total")));
    }
    let window: Vec<f64> = (0..n_samples)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n_samples as f64).cos())
        .collect();
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(n_samples);

    let chunks: Vec<(usize, usize)> = (0..cfg.n_traj)
        .step_by(CHUNK)
        .map(|s| (s, (s + CHUNK).min(cfg.n_traj)))
        .collect();
    let partial: Vec<Vec<f64>> = chunks
        .par_iter()
        .map(|&(start, end)| {
            let mut acc = vec![0.0; n_samples];
            let mut buf = vec![Complex64::new(0.0, 0.0); n_samples];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            for traj in start..end {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(traj as u64);
                fill_trajectory(cfg, &process, shift, &window, &mut rng, &mut buf);
                fft.process_with_scratch(&mut buf, &mut scratch);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += b.norm_sqr();
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; n_samples];
    for p in &partial {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }

    let df = 1.0 / cfg.t_total;
    let half = n_samples / 2;
    let offsets: Vec<f64> = (0..n_samples).map(|i| shift + (i as f64 - half as f64) * df).collect();
    // reorder FFT bins from [0, N) to [-N/2, N/2)
    let density: Vec<f64> = (0..n_samples).map(|i| total[(i + half) % n_samples]).collect();
    let mut shape = Lineshape::new(offsets, density)?.normalized()?;
    if cfg.delta_c > 0.0 && cfg.t_total * cfg.delta_c < 10.0 {
        shape.warnings.push("t_total is not long against 1/delta_c; peaks are resolution-limited".into());
    }
    Ok(shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).round() as usize + 1;
        (0..n).map(|i| lo + step * i as f64).collect()
    }

    #[test]
    fn discrete_peaks_at_half_integer_multiples() {
        let g = grid(-10.0, 320.0, 0.01);
        let shape = lineshape_discrete(10.0, 4.0, 2.0 * PI * 0.01, &g).unwrap();
        assert!((shape.integral() - 1.0).abs() < 1e-9);
        let d = shape.density();
        let maxima: Vec<f64> =
            (1..d.len() - 1).filter(|&i| d[i] > d[i - 1] && d[i] > d[i + 1]).map(|i| g[i]).take(4).collect();
        for (n, f) in maxima.iter().enumerate() {
            assert!((f - 4.0 * (n as f64 + 0.5)).abs() < 0.011, "{maxima:?}");
        }
        assert!(shape.warnings.is_empty());
    }

    #[test]
    fn discrete_mean_is_first_moment_law() {
        let g = grid(-100.0, 500.0, 0.05);
        let shape = lineshape_discrete(10.0, 4.0, 2.0 * PI * 0.01, &g).unwrap();
        assert!((shape.mean_offset() / 42.0 - 1.0).abs() < 0.02, "{}", shape.mean_offset());
    }

    #[test]
    fn ground_state_only_when_cold() {
        let g = grid(-5.0, 5.0, 0.01);
        let shape = lineshape_discrete(0.0, 4.0, 1.0, &g).unwrap();
        let imax = shape.density().iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!((g[imax] - 2.0).abs() < 0.011);
    }

    #[test]
    fn zero_damping_gives_exact_weights() {
        let g = grid(0.0, 320.0, 0.5);
        let shape = lineshape_discrete(10.0, 4.0, 0.0, &g).unwrap();
        let d = shape.density();
        // centres 2, 6, 10, ... Hz sit on grid indices 4, 12, 20, ...
        let w0 = d[4] * 0.5;
        let w1 = d[12] * 0.5;
        assert!((w1 / w0 - 10.0 / 11.0).abs() < 1e-9);
        assert!((w0 - 1.0 / 11.0).abs() < 2e-3);
    }

    #[test]
    fn narrow_grid_is_a_coverage_error() {
        let g = grid(0.0, 100.0, 0.1);
        assert!(matches!(lineshape_discrete(10.0, 4.0, 0.1, &g), Err(Error::Domain(_))));
    }

    #[test]
    fn broad_regime_warns() {
        let g = grid(-200.0, 400.0, 0.1);
        let shape = lineshape_discrete(10.0, 4.0, 2.0 * PI, &g).unwrap();
        assert_eq!(shape.warnings.len(), 1);
    }

    #[test]
    fn plan_is_5_smooth_and_covers_band() {
        let cfg = MonteCarloConfig { nbar: 10.0, delta_c: 4.0, gamma_z: 0.0628, t_total: 64.0, n_traj: 1, seed: 0 };
        let (n, shift) = sampling_plan(&cfg);
        assert!(is_5_smooth(n) && n % 2 == 0);
        assert_eq!(shift, 42.0);
        let half_band = n as f64 / 64.0 / 2.0;
        assert!(half_band > 294.0 - 42.0);
    }

    #[test]
    fn no_bottle_gives_single_line_at_zero() {
        let cfg = MonteCarloConfig { nbar: 10.0, delta_c: 0.0, gamma_z: 1.0, t_total: 8.0, n_traj: 4, seed: 1 };
        let shape = lineshape_monte_carlo(&cfg).unwrap();
        let d = shape.density();
        let imax = d.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!(shape.offsets()[imax].abs() < 1e-12);
        // Hann main lobe is two bins wide on each side
        let lobe: f64 = d[imax - 2..=imax + 2].iter().sum::<f64>() / cfg.t_total;
        assert!(lobe > 0.99, "{lobe}");
    }

    #[test]
    fn monte_carlo_is_seed_deterministic() {
        let cfg = MonteCarloConfig { nbar: 2.0, delta_c: 4.0, gamma_z: 2.0, t_total: 4.0, n_traj: 70, seed: 9 };
        let a = lineshape_monte_carlo(&cfg).unwrap();
        let b = lineshape_monte_carlo(&cfg).unwrap();
        assert_eq!(a, b);
        let c = lineshape_monte_carlo(&MonteCarloConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.density(), c.density());
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let cfg = MonteCarloConfig { nbar: 2.0, delta_c: 4.0, gamma_z: 2.0, t_total: 4.0, n_traj: 200, seed: 5 };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| lineshape_monte_carlo(&cfg).unwrap());
        let b = three.install(|| lineshape_monte_carlo(&cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn negative_rates_rejected() {
        let cfg = MonteCarloConfig { nbar: 2.0, delta_c: 4.0, gamma_z: -1.0, t_total: 4.0, n_traj: 1, seed: 0 };
        assert!(matches!(lineshape_monte_carlo(&cfg), Err(Error::InvalidParameter(_))));
    }
}
