//! Choose a tuning capacitor that keeps the off-state resistance high while
//! the on-state suppresses damping enough.

use trapdamp::circuit::CircuitParams;
use trapdamp::inference::{log_grid, scan_ctuning, DesignConstraints};

fn main() -> trapdamp::Result<()> {
    let p = CircuitParams::default();
    let grid = log_grid(1e-12, 200e-12, 60)?;
    for constraints in [
        DesignConstraints { r_min: 60e3, eta_min: 100.0 },
        DesignConstraints { r_min: 60e3, eta_min: 350.0 },
        DesignConstraints { r_min: 90e3, eta_min: 1000.0 },
    ] {
        let scan = scan_ctuning(&p, 215.3e6, &grid, &constraints)?;
        match (scan.recommended, scan.pareto_best) {
            (Some(c), _) => println!(
                "R ≥ {:.0} kΩ, η ≥ {:.0}: use {:.2} pF",
                constraints.r_min / 1e3,
                constraints.eta_min,
                c * 1e12
            ),
            (None, Some(best)) => println!(
                "R ≥ {:.0} kΩ, η ≥ {:.0}: unattainable; closest is {:.2} pF (R {:.1} kΩ, η {:.0})",
                constraints.r_min / 1e3,
                constraints.eta_min,
                best.c_tuning * 1e12,
                best.r_off_state / 1e3,
                best.eta
            ),
            (None, None) => unreachable!(),
        }
    }
    Ok(())
}
