//! Johnson-noise dips: the noise of the tank shorted by the electrons'
//! equivalent series LC at the axial frequency.

use std::f64::consts::PI;

use trapdamp::circuit::{CircuitParams, SwitchState};
use trapdamp::particle::{damping_rate, ParticleEnsemble, TrapGeometry};
use trapdamp::spectra::{centered_grid, dip_fwhm, dip_spectrum};

fn main() -> trapdamp::Result<()> {
    let geom = TrapGeometry::default();
    for r in [36e3, 19e3, 7.6e3] {
        let p = CircuitParams::default().with_peak_resistance(r)?;
        let f_z = p.off_state_resonance()?;
        let tank = p.at(SwitchState::Off);
        for n in [1, 10] {
            let ens = ParticleEnsemble::electrons(n);
            let expected = n as f64 * damping_rate(&geom, &ParticleEnsemble::electrons(1), r)? / (2.0 * PI);
            let grid = centered_grid(f_z + 1e-4 * expected, 4.0 * expected, 4001)?;
            let spec = dip_spectrum(&tank, &geom, Some(&ens), f_z, 4.2, &grid)?;
            println!(
                "R = {:>5.1} kΩ, N = {n:>2}: dip FWHM {:.3} Hz (Nγ/2π = {:.3} Hz)",
                r / 1e3,
                dip_fwhm(&spec)?,
                expected
            );
        }
    }
    Ok(())
}
