//! Recover the switch transistor's parameters from (R, η) measured at several
//! tuning capacitors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use trapdamp::circuit::{CircuitParams, HemtModel};
use trapdamp::inference::{fit_hemt_model, log_grid, synthetic_measurements};

fn main() -> trapdamp::Result<()> {
    let fixed = CircuitParams::default();
    let f_z = 215.3e6;
    let truth = HemtModel::FITTED;
    let mut data = synthetic_measurements(&fixed, &truth, &log_grid(1e-12, 200e-12, 20)?, f_z)?;

    // 1% multiplicative noise on both observables
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 0.01).unwrap();
    for m in &mut data {
        m.r_off_state *= 1.0 + noise.sample(&mut rng);
        m.eta *= 1.0 + noise.sample(&mut rng);
    }

    let fit = fit_hemt_model(&data, &fixed, f_z)?;
    println!("converged {} after {} iterations, rms log residual {:.4}", fit.converged, fit.iterations, fit.residual);
    println!("r_off {:>10.0} Ω  (true {:.0})", fit.hemt.r_off, truth.r_off);
    println!("r_on  {:>10.3} Ω  (true {:.3})", fit.hemt.r_on, truth.r_on);
    println!("c_ds  {:>10.3} pF (true {:.3})", fit.hemt.c_ds * 1e12, truth.c_ds * 1e12);
    Ok(())
}
