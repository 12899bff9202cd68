//! Transmission through the capacitive divider and back to the impedance.

use trapdamp::circuit::{impedance, CircuitParams, SwitchState};
use trapdamp::spectra::{divider_source_impedance, impedance_from_s21, shunt_through_s21};

fn main() -> trapdamp::Result<()> {
    let p = CircuitParams::default();
    let src = divider_source_impedance(0.2e-12, 100e-12, 50.0)?;
    println!("source impedance Z0' = {:.3} MΩ", src.z0_prime / 1e6);

    let grid: Vec<f64> = (0..=10).map(|i| 205e6 + 1e6 * i as f64).collect();
    let s21 = shunt_through_s21(&p.at(SwitchState::Off), &src, &grid)?;
    let z = impedance_from_s21(&s21, &src)?;
    for ((f, s), (_, zr)) in s21.points().iter().zip(z.points()) {
        let truth = impedance(&p, SwitchState::Off, *f)?;
        println!(
            "{:.0} MHz: |S21| = {:.3e}, Re Z = {:.2} kΩ (relative error {:.1e})",
            f / 1e6,
            s.norm(),
            zr.re / 1e3,
            (zr - truth).norm() / truth.norm()
        );
    }
    if s21.weak_coupling_violated {
        println!("|Z| is not small against Z0'/2 somewhere on the grid");
    }
    Ok(())
}
