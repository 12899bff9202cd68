//! Thermal birth-death process for the axial quantum number.
//!
//! Coupled to a reservoir with mean occupation `nbar` at rate `γ`, level `n`
//! moves up at `γ nbar (n+1)` and down at `γ (nbar+1) n`. The stationary
//! distribution is geometric with mean `nbar`.

use rand::Rng;
use rand_distr::{Distribution, Exp, Geometric};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxialJumpProcess {
    pub nbar: f64,
    /// Coupling rate γ_z, 1/s.
    pub gamma: f64,
}

/// A level change at time `t`; the process holds `n` from `t` on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub t: f64,
    pub n: u32,
}

impl AxialJumpProcess {
    pub fn new(nbar: f64, gamma: f64) -> Result<Self> {
        if !(nbar >= 0.0 && nbar.is_finite()) {
            return Err(Error::invalid("mean occupation must be non-negative"));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::invalid("jump rate must be non-negative"));
        }
        Ok(AxialJumpProcess { nbar, gamma })
    }

    /// (up, down) transition rates out of level `n`.
    pub fn rates(&self, n: u32) -> (f64, f64) {
        let n = n as f64;
        (self.gamma * self.nbar * (n + 1.0), self.gamma * (self.nbar + 1.0) * n)
    }

    /// Draw a level from the stationary distribution.
    pub fn sample_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        if self.nbar == 0.0 {
            return 0;
        }
        let geo = Geometric::new(1.0 / (self.nbar + 1.0)).expect("probability in (0, 1]");
        geo.sample(rng).min(u32::MAX as u64) as u32
    }

    /// Waiting time and destination of the next jump out of `n`, or `None`
    /// if `n` is absorbing (zero total rate).
    pub fn next_jump<R: Rng + ?Sized>(&self, n: u32, rng: &mut R) -> Option<(f64, u32)> {
        let (up, down) = self.rates(n);
        let total = up + down;
        if !(total > 0.0) {
            return None;
        }
        let wait = Exp::new(total).expect("positive rate").sample(rng);
        let to = if rng.gen::<f64>() * total < up { n + 1 } else { n - 1 };
        Some((wait, to))
    }

    /// Every jump in `(0, t_total]` starting from level `n0`.
    pub fn trajectory<R: Rng + ?Sized>(&self, n0: u32, t_total: f64, rng: &mut R) -> Vec<Jump> {
        let mut out = Vec::new();
        let (mut t, mut n) = (0.0, n0);
        while let Some((wait, to)) = self.next_jump(n, rng) {
            t += wait;
            if t > t_total {
                break;
            }
            n = to;
            out.push(Jump { t, n });
        }
        out
    }

    /// Fraction of time spent in each level over `[0, t_total]`, indexed by level.
    pub fn occupation_histogram(n0: u32, jumps: &[Jump], t_total: f64) -> Vec<f64> {
        let mut hist: Vec<f64> = Vec::new();
        let mut add = |n: u32, dt: f64| {
            let i = n as usize;
            if hist.len() <= i {
                hist.resize(i + 1, 0.0);
            }
            hist[i] += dt / t_total;
        };
        let (mut t, mut n) = (0.0, n0);
        for j in jumps {
            add(n, j.t - t);
            t = j.t;
            n = j.n;
        }
        add(n, t_total - t);
        hist
    }
}
