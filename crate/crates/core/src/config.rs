//! Run configuration: one JSON document mirroring every module input.
//! Missing fields take their defaults; unknown fields are rejected.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitParams, HemtModel, DEFAULT_PEAK_RESISTANCE};
use crate::error::{Error, Result};
use crate::inference::DesignConstraints;
use crate::particle::{ParticleEnsemble, TrapGeometry};
use crate::quantum::{BottleParams, ModeFrequencies};

/// Circuit components. `r_loss` may be left out, in which case it is
/// solved so the off-state resonance peaks at `peak_resistance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircuitConfig {
    pub c_trap: f64,
    pub l1: f64,
    pub l2: f64,
    pub r_loss: Option<f64>,
    pub peak_resistance: f64,
    pub c_amp: f64,
    pub c_tuning: f64,
    pub hemt: HemtModel,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        let p = CircuitParams::default();
        CircuitConfig {
            c_trap: p.c_trap,
            l1: p.l1,
            l2: p.l2,
            r_loss: None,
            peak_resistance: DEFAULT_PEAK_RESISTANCE,
            c_amp: p.c_amp,
            c_tuning: p.c_tuning,
            hemt: p.hemt,
        }
    }
}

impl CircuitConfig {
    pub fn params(&self) -> Result<CircuitParams> {
        let base = CircuitParams {
            c_trap: self.c_trap,
            l1: self.l1,
            l2: self.l2,
            r_loss: self.r_loss.unwrap_or(1e9),
            c_amp: self.c_amp,
            c_tuning: self.c_tuning,
            hemt: self.hemt,
        };
        base.validate()?;
        match self.r_loss {
            Some(_) => Ok(base),
            None => base.with_peak_resistance(self.peak_resistance),
        }
    }
}

/// Frequency sweep `f_start..=f_stop` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub f_start: f64,
    pub f_stop: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_start > 0.0 && self.f_stop > self.f_start && self.f_stop.is_finite()) || self.n < 2 {
            return Err(Error::invalid(format!("bad grid {self:?}")));
        }
        Ok(())
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        crate::circuit::uniform_grid(self.f_start, self.f_stop, self.n)
    }
}

impl std::str::FromStr for GridSpec {
    type Err = Error;

    /// `f_start,f_stop,n`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("grid `{s}` is not f_start,f_stop,n")));
        }
        let bad = |p: &str| Error::Config(format!("grid `{s}`: `{p}` is not a number"));
        let g = GridSpec {
            f_start: parts[0].parse().map_err(|_| bad(parts[0]))?,
            f_stop: parts[1].parse().map_err(|_| bad(parts[1]))?,
            n: parts[2].parse().map_err(|_| bad(parts[2]))?,
        };
        g.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DipConfig {
    /// Peak resistances of the detector for which dips are computed.
    pub resistances_ohm: Vec<f64>,
    pub particle_counts: Vec<u32>,
    /// Half width of the frequency window; by default 20 dip widths.
    pub half_span_hz: Option<f64>,
    pub points: usize,
}

impl Default for DipConfig {
    fn default() -> Self {
        DipConfig {
            resistances_ohm: vec![36e3, 19e3, 7.6e3],
            particle_counts: vec![1],
            half_span_hz: None,
            points: 2001,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShuntThroughConfig {
    pub c_couple: f64,
    pub c_shunt: f64,
    pub z_line_ohm: f64,
}

impl Default for ShuntThroughConfig {
    fn default() -> Self {
        ShuntThroughConfig { c_couple: 0.2e-12, c_shunt: 100e-12, z_line_ohm: 50.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineshapeConfig {
    pub nbar: f64,
    pub delta_c_hz: f64,
    /// Axial damping rates γ_z/2π, one spectrum each.
    pub gamma_z_over_2pi_hz: Vec<f64>,
    pub trajectories: usize,
    /// Record length per trajectory; by default long enough to resolve the
    /// narrowest peak.
    pub duration_s: Option<f64>,
}

impl Default for LineshapeConfig {
    fn default() -> Self {
        LineshapeConfig {
            nbar: 10.0,
            delta_c_hz: 4.0,
            gamma_z_over_2pi_hz: vec![1.0, 0.01],
            trajectories: 10_000,
            duration_s: None,
        }
    }
}

impl LineshapeConfig {
    pub fn duration_for(&self, gamma_over_2pi: f64) -> f64 {
        if let Some(t) = self.duration_s {
            return t;
        }
        // ~25 bins across the half width of the n_z = 0 line
        let hwhm = self.nbar.max(1.0) * gamma_over_2pi;
        (25.6 / hwhm).clamp(16.0, 1024.0)
    }

    pub fn gamma_z(gamma_over_2pi: f64) -> f64 {
        2.0 * PI * gamma_over_2pi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    /// Frequency at which R and η are evaluated; the tank is trimmed to it.
    pub f_eval_hz: f64,
    pub c_tuning_min_pf: f64,
    pub c_tuning_max_pf: f64,
    pub points: usize,
    pub constraints: DesignConstraints,
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig {
            f_eval_hz: 215.3e6,
            c_tuning_min_pf: 1.0,
            c_tuning_max_pf: 200.0,
            points: 60,
            constraints: DesignConstraints::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub circuit: CircuitConfig,
    pub geometry: TrapGeometry,
    pub particles: ParticleEnsemble,
    pub modes: ModeFrequencies,
    pub bottle: BottleParams,
    pub temperature_k: f64,
    /// Sweep for `impedance`, `s21`; by default 150-260 MHz.
    pub grid: Option<GridSpec>,
    pub dip: DipConfig,
    pub shunt_through: ShuntThroughConfig,
    pub lineshape: LineshapeConfig,
    pub design: DesignConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            circuit: CircuitConfig::default(),
            geometry: TrapGeometry::default(),
            particles: ParticleEnsemble::default(),
            modes: ModeFrequencies::default(),
            bottle: BottleParams::default(),
            temperature_k: 4.2,
            grid: None,
            dip: DipConfig::default(),
            shunt_through: ShuntThroughConfig::default(),
            lineshape: LineshapeConfig::default(),
            design: DesignConfig::default(),
            seed: 42,
        }
    }
}

pub const DEFAULT_GRID: GridSpec = GridSpec { f_start: 150e6, f_stop: 260e6, n: 2201 };

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid.unwrap_or(DEFAULT_GRID)
    }

    /// Check every section against its owning type. All failures are
    /// reported as configuration errors.
    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })
    }

    fn check(&self) -> Result<()> {
        self.circuit.params()?;
        if !(self.circuit.peak_resistance > 0.0) {
            return Err(Error::invalid("circuit.peak_resistance must be positive"));
        }
        self.geometry.validate()?;
        self.particles.validate()?;
        self.modes.validate()?;
        if !(self.bottle.delta_c.is_finite() && self.bottle.delta_s.is_finite()) {
            return Err(Error::invalid("bottle shifts must be finite"));
        }
        if !(self.temperature_k > 0.0 && self.temperature_k.is_finite()) {
            return Err(Error::invalid("temperature_k must be positive"));
        }
        if let Some(g) = &self.grid {
            g.validate()?;
        }

        let d = &self.dip;
        if d.resistances_ohm.is_empty() || d.resistances_ohm.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::invalid("dip.resistances_ohm must be a nonempty list of positive values"));
        }
        if d.particle_counts.is_empty() || d.particle_counts.contains(&0) {
            return Err(Error::invalid("dip.particle_counts must be a nonempty list of counts >= 1"));
        }
        if d.half_span_hz.is_some_and(|h| !(h > 0.0)) || d.points < 3 {
            return Err(Error::invalid("dip window must be positive with at least 3 points"));
        }

        let s = &self.shunt_through;
        crate::spectra::divider_source_impedance(s.c_couple, s.c_shunt, s.z_line_ohm)?;

        let l = &self.lineshape;
        if !(l.nbar >= 0.0 && l.nbar.is_finite()) || !(l.delta_c_hz >= 0.0 && l.delta_c_hz.is_finite()) {
            return Err(Error::invalid("lineshape.nbar and delta_c_hz must be non-negative"));
        }
        if l.gamma_z_over_2pi_hz.is_empty() || l.gamma_z_over_2pi_hz.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(Error::invalid("lineshape.gamma_z_over_2pi_hz must list non-negative rates"));
        }
        if l.trajectories == 0 || l.duration_s.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::invalid("lineshape needs at least one trajectory and a positive duration"));
        }

        let g = &self.design;
        if !(g.f_eval_hz > 0.0) || !(g.c_tuning_min_pf > 0.0 && g.c_tuning_max_pf > g.c_tuning_min_pf) || g.points < 2 {
            return Err(Error::invalid("design grid needs 0 < min < max, >= 2 points and a positive frequency"));
        }
        g.constraints.validate()?;
        Ok(())
    }
}
