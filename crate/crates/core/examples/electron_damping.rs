//! Resistive damping of the axial motion: the rate for one and many
//! electrons, and a ring-down integrated in the time domain.

use trapdamp::constants::ELECTRON_MASS;
use trapdamp::particle::{
    damping_rate, free_decay, instantaneous_amplitude, AxialIntegrator, AxialMode, ParticleEnsemble, TrapGeometry,
};

fn main() -> trapdamp::Result<()> {
    let geom = TrapGeometry::default();
    for (label, r) in [("switch off", 83e3), ("switch on", 83e3 / 300.0)] {
        let g = damping_rate(&geom, &ParticleEnsemble::electrons(1), r)?;
        println!("{label}: R = {:>8.1} Ω, γ = {g:.3} s⁻¹, 1/γ = {:.3} s", r, 1.0 / g);
    }
    let g = damping_rate(&geom, &ParticleEnsemble::electrons(1), 83e3)?;

    // a scaled-down axial frequency keeps the integration short while
    // leaving the envelope physics unchanged
    let mode = AxialMode::new(2e3, 200.0)?;
    let run = AxialIntegrator::new(mode, ELECTRON_MASS).run(1e-6, 0.0, 0.02, 64)?;
    for p in run.iter().step_by(run.len() / 5) {
        let a = instantaneous_amplitude(p, mode.f_z);
        println!("t = {:.4} s: amplitude {:.4e} m (expected {:.4e})", p.t, a, free_decay(&mode, 1e-6, p.t)?);
    }
    println!("for the trap itself, amplitude decays as exp(-γt/2) with γ = {g:.2} s⁻¹");
    Ok(())
}
