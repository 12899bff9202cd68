//! How much the transistor switch suppresses the damping resistance as the
//! tuning capacitor grows.

use trapdamp::circuit::{CircuitParams, HemtModel};
use trapdamp::inference::{log_grid, switch_response};

fn main() -> trapdamp::Result<()> {
    let p = CircuitParams::default();
    let f_z = 215.3e6;
    println!("{:>10} {:>12} {:>10}", "C_tuning", "R_off", "eta");
    for c in log_grid(1e-12, 200e-12, 12)? {
        let (r, eta) = switch_response(&p, &HemtModel::FITTED, c, f_z)?;
        println!("{:>7.2} pF {:>9.1} kΩ {:>10.1}", c * 1e12, r / 1e3, eta);
    }
    Ok(())
}
