//! Sweep the detection circuit in both switch states and fit each resonance.
//!
//! `cargo run --example impedance_sweep`

use trapdamp::circuit::{characterize_resonance, impedance_sweep, CircuitParams, SwitchState};

fn main() -> trapdamp::Result<()> {
    let p = CircuitParams::default();
    let f0 = p.off_state_resonance()?;
    println!("off-state resonance {:.4} MHz, L = {:.0} nH", f0 / 1e6, p.l_total() * 1e9);

    for state in [SwitchState::Off, SwitchState::On] {
        let trace = impedance_sweep(&p, state, 150e6, 260e6, 4001)?;
        let peak = trace
            .points()
            .iter()
            .max_by(|a, b| a.1.re.total_cmp(&b.1.re))
            .map(|&(f, _)| f)
            .unwrap();
        // refine on a narrow sweep around the coarse maximum
        let fine = impedance_sweep(&p, state, peak - 3e6, peak + 3e6, 2001)?;
        let fit = characterize_resonance(&fine, p.l_total())?;
        println!(
            "{state:?}: f0 = {:.3} MHz, Q = {:.1}, R = {:.1} kΩ (QωL = {:.1} kΩ)",
            fit.f0 / 1e6,
            fit.q,
            fit.r_parallel / 1e3,
            fit.r_from_inductance().unwrap_or(f64::NAN) / 1e3
        );
    }
    Ok(())
}
