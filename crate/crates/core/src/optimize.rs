//! Small dense optimizers for the low-dimensional fits in this crate.
//!
//! Both work on plain `&[f64]` parameter vectors. Callers are expected to
//! scale their parameters to order one (log-space, ppm offsets) before
//! handing them over; the finite-difference Jacobian assumes that.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the sum of squares by less than this
    /// fraction.
    pub relative_tolerance: f64,
    /// Stop when the sum of squares itself drops below this value.
    pub absolute_tolerance: f64,
    /// Central-difference step for the Jacobian.
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            relative_tolerance: 1e-10,
            absolute_tolerance: 1e-30,
            fd_step: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    /// Sum of squared residuals at `x`.
    pub ssr: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn fd_jacobian<F>(residuals: &F, x: &[f64], r0_len: usize, h: f64) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = x.len();
    let mut jac = DMatrix::zeros(r0_len, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let step = h * x[j].abs().max(1.0);
        xp[j] = x[j] + step;
        let rp = residuals(&xp)?;
        xp[j] = x[j] - step;
        let rm = residuals(&xp)?;
        xp[j] = x[j];
        for i in 0..r0_len {
            jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * step);
        }
    }
    Some(jac)
}

/// Levenberg-Marquardt with Marquardt's diagonal scaling and a
/// finite-difference Jacobian.
///
/// `residuals` returns `None` when the model cannot be evaluated at a trial
/// point; such points are treated as uphill steps.
pub fn levenberg_marquardt<F>(residuals: F, x0: &[f64], opts: &LmOptions) -> Option<LmOutcome>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut x = x0.to_vec();
    let mut r = residuals(&x)?;
    let m = r.len();
    let n = x.len();
    let mut ssr = sum_sq(&r);
    let mut lambda = 1e-3;

    for iteration in 1..=opts.max_iterations {
        if ssr <= opts.absolute_tolerance {
            return Some(LmOutcome { x, ssr, iterations: iteration - 1, converged: true });
        }
        let jac = fd_jacobian(&residuals, &x, m, opts.fd_step)?;
        let jt = jac.transpose();
        let a = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);

        loop {
            let mut damped = a.clone();
            for k in 0..n {
                damped[(k, k)] += lambda * a[(k, k)].max(1e-300);
            }
            let step = damped.lu().solve(&(-&g));
            let Some(step) = step else {
                lambda *= 10.0;
                if lambda > 1e20 {
                    return Some(LmOutcome { x, ssr, iterations: iteration, converged: true });
                }
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let trial_r = residuals(&trial).filter(|v| v.iter().all(|e| e.is_finite()));
            match trial_r {
                Some(tr) if sum_sq(&tr) < ssr => {
                    let new_ssr = sum_sq(&tr);
                    let gain = ssr - new_ssr;
                    x = trial;
                    r = tr;
                    let old = ssr;
                    ssr = new_ssr;
                    lambda = (lambda / 10.0).max(1e-15);
                    if gain <= opts.relative_tolerance * old || ssr <= opts.absolute_tolerance {
                        return Some(LmOutcome { x, ssr, iterations: iteration, converged: true });
                    }
                    break;
                }
                _ => {
                    lambda *= 10.0;
                    // No downhill direction left at machine precision.
                    if lambda > 1e20 {
                        return Some(LmOutcome { x, ssr, iterations: iteration, converged: true });
                    }
                }
            }
        }
    }
    Some(LmOutcome { x, ssr, iterations: opts.max_iterations, converged: false })
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    /// Converged once every vertex lies within this distance (max-norm) of the best.
    pub diameter_tolerance: f64,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { max_iterations: 5000, diameter_tolerance: 1e-6, initial_step: 0.25 }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Derivative-free Nelder-Mead minimization with standard coefficients.
pub fn nelder_mead<F>(f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadOutcome
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    for iteration in 0..opts.max_iterations {
        let mut order: Vec<usize> = (0..=n).collect();
        // Stable sort keeps ties in vertex order so runs are reproducible.
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let diameter = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if diameter < opts.diameter_tolerance {
            return NelderMeadOutcome {
                x: simplex[0].clone(),
                value: values[0],
                iterations: iteration,
                converged: true,
            };
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let reflected = along(alpha);
        let f_r = eval(&reflected);
        if f_r < values[0] {
            let expanded = along(gamma);
            let f_e = eval(&expanded);
            if f_e < f_r {
                simplex[n] = expanded;
                values[n] = f_e;
            } else {
                simplex[n] = reflected;
                values[n] = f_r;
            }
            continue;
        }
        if f_r < values[n - 1] {
            simplex[n] = reflected;
            values[n] = f_r;
            continue;
        }
        let (contracted, f_c) = if f_r < values[n] {
            let c = along(rho);
            let fc = eval(&c);
            (c, fc)
        } else {
            let c = along(-rho);
            let fc = eval(&c);
            (c, fc)
        };
        if f_c < values[n].min(f_r) {
            simplex[n] = contracted;
            values[n] = f_c;
            continue;
        }
        // shrink toward the best vertex
        let best = simplex[0].clone();
        for i in 1..=n {
            for (x, b) in simplex[i].iter_mut().zip(&best) {
                *x = b + sigma * (*x - b);
            }
            values[i] = eval(&simplex[i]);
        }
    }

    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    NelderMeadOutcome {
        x: simplex[best].clone(),
        value: values[best],
        iterations: opts.max_iterations,
        converged: false,
    }
}
