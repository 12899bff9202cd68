use std::f64::consts::PI;

use proptest::prelude::*;
use trapdamp::circuit::{impedance, suppression_eta, CircuitParams, HemtModel, Resistive, SwitchState};
use trapdamp::inference::{log_grid, scan_ctuning, switch_response, DesignConstraints};
use trapdamp::particle::{damping_rate, ParticleEnsemble, TrapGeometry};
use trapdamp::quantum::levels::{thermal_cutoff, thermal_weight};
use trapdamp::quantum::lineshape_discrete;
use trapdamp::spectra::{
    centered_grid, dip_fwhm, dip_spectrum, divider_source_impedance, impedance_from_s21, shunt_through_s21,
};

fn hemt() -> impl Strategy<Value = HemtModel> {
    (1e4..1e7f64, 1.0..100.0f64, 0.3e-12..5e-12f64).prop_map(|(r_off, r_on, c_ds)| HemtModel { r_off, r_on, c_ds })
}

fn circuit() -> impl Strategy<Value = CircuitParams> {
    (2e-12..20e-12f64, 20e-9..100e-9f64, 5e-9..40e-9f64, 1e4..1e6f64, 0.0..5e-12f64, 0.0..200e-12f64, hemt())
        .prop_map(|(c_trap, l1, l2, r_loss, c_amp, c_tuning, hemt)| CircuitParams {
            c_trap,
            l1,
            l2,
            r_loss,
            c_amp,
            c_tuning,
            hemt,
        })
}

fn state() -> impl Strategy<Value = SwitchState> {
    prop_oneof![Just(SwitchState::Off), Just(SwitchState::On)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn circuit_is_passive(p in circuit(), s in state(), f in 1e6..1e9f64) {
        let z = impedance(&p, s, f).unwrap();
        prop_assert!(z.re >= -1e-12 * z.norm(), "{z}");
    }

    #[test]
    fn transmission_inverts_exactly(p in circuit(), s in state(), c_couple in 0.05e-12..2e-12f64) {
        let src = divider_source_impedance(c_couple, 100e-12, 50.0).unwrap();
        let grid: Vec<f64> = (0..64).map(|i| 150e6 + 2e6 * i as f64).collect();
        let tank = p.at(s);
        let s21 = shunt_through_s21(&tank, &src, &grid).unwrap();
        let back = impedance_from_s21(&s21, &src).unwrap();
        for (&f, (g, z)) in grid.iter().zip(back.points()) {
            let truth = impedance(&p, s, f).unwrap();
            prop_assert_eq!(f, *g);
            prop_assert!((z - truth).norm() <= 1e-9 * truth.norm());
        }
    }

    #[test]
    fn damping_scales_with_resistance_and_charge(r in 1e3..1e6f64, k in 0.1..10.0f64, n in 1u32..5000) {
        let geom = TrapGeometry::default();
        let one = ParticleEnsemble::electrons(1);
        let g = damping_rate(&geom, &one, r).unwrap();
        prop_assert!((damping_rate(&geom, &one, k * r).unwrap() / g - k).abs() < 1e-12 * k);
        // the N-particle rate is N times the single-particle one
        let ens = ParticleEnsemble::electrons(n);
        let gn = damping_rate(&geom, &ens, r).unwrap();
        prop_assert!((gn / g - 1.0).abs() < 1e-12 || (gn / (n as f64 * g) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fitted_switch_suppression_grows_with_tuning_capacitance(f_z in 190e6..240e6f64, r_peak in 20e3..150e3f64) {
        // a leaky off state (r_off near the tank resistance) can turn this over; the fitted switch does not
        let p = CircuitParams::default().with_peak_resistance(r_peak).unwrap();
        let grid = log_grid(1e-12, 200e-12, 40).unwrap();
        let etas: Vec<f64> =
            grid.iter().map(|&c| switch_response(&p, &HemtModel::FITTED, c, f_z).unwrap().1).collect();
        for w in etas.windows(2) {
            prop_assert!(w[1] >= 0.99 * w[0], "{etas:?}");
        }
    }

    #[test]
    fn suppression_is_at_least_one_for_a_good_switch(h in hemt(), c in 1e-12..200e-12f64) {
        let p = CircuitParams { c_tuning: c, hemt: h, ..CircuitParams::default() };
        prop_assume!(h.r_off > 1e3 * h.r_on);
        let f_z = p.off_state_resonance().unwrap();
        prop_assert!(suppression_eta(&p, f_z).unwrap() >= 1.0 - 1e-9);
    }

    #[test]
    fn relaxing_constraints_never_raises_the_recommendation(
        r_min in 20e3..90e3f64,
        eta_min in 10.0..600.0f64,
        relax in 0.3..1.0f64,
    ) {
        let p = CircuitParams::default();
        let grid = log_grid(1e-12, 200e-12, 24).unwrap();
        let strict = scan_ctuning(&p, 215.3e6, &grid, &DesignConstraints { r_min, eta_min }).unwrap();
        let loose = scan_ctuning(&p, 215.3e6, &grid, &DesignConstraints { r_min: relax * r_min, eta_min: relax * eta_min })
            .unwrap();
        if let Some(c) = strict.recommended {
            let l = loose.recommended.expect("looser constraints stay satisfiable");
            prop_assert!(l <= c);
        }
        prop_assert_eq!(strict.satisfiable, strict.pareto_best.is_none());
    }

    #[test]
    fn thermal_weights_sum_to_coverage(nbar in 0.01..200.0f64, coverage in 0.5..0.9999f64) {
        let n_max = thermal_cutoff(nbar, coverage);
        let total: f64 = (0..=n_max).map(|n| thermal_weight(n, nbar).unwrap()).sum();
        prop_assert!(total >= coverage - 1e-12);
        if n_max > 0 {
            prop_assert!(total - thermal_weight(n_max, nbar).unwrap() < coverage + 1e-12);
        }
    }

    #[test]
    fn discrete_lineshape_weights_follow_the_thermal_ladder(nbar in 0.5..3.0f64, delta_c in 2.0..10.0f64) {
        // with the lines far narrower than their spacing, each window holds one level
        const PER: usize = 20_000;
        let gamma = 2.0 * PI * 1e-3;
        let step = delta_c / PER as f64;
        let windows = thermal_cutoff(nbar, 0.999) as usize + 2;
        let grid: Vec<f64> = (0..PER * windows).map(|i| (i as f64 + 0.5) * step).collect();
        let shape = lineshape_discrete(nbar, delta_c, gamma, &grid).unwrap();
        for n in 0..3u32 {
            let window = &shape.density()[PER * n as usize..PER * (n as usize + 1)];
            let area: f64 = window.iter().sum::<f64>() * step;
            let w = thermal_weight(n, nbar).unwrap();
            prop_assert!((area / w - 1.0).abs() < 0.02, "level {n}: {area} vs {w}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn dip_width_is_n_times_the_single_particle_rate(r in 1e4..1e5f64, n in 1u32..2000, f_z in 50e6..300e6f64) {
        let geom = TrapGeometry::default();
        let ens = ParticleEnsemble::electrons(n);
        let expected = n as f64 * damping_rate(&geom, &ParticleEnsemble::electrons(1), r).unwrap() / (2.0 * PI);
        let grid = centered_grid(f_z + 0.37 * expected / 2000.0, 4.0 * expected, 4001).unwrap();
        let s = dip_spectrum(&Resistive(r), &geom, Some(&ens), f_z, 4.2, &grid).unwrap();
        let w = dip_fwhm(&s).unwrap();
        prop_assert!((w / expected - 1.0).abs() < 0.02, "{w} vs {expected}");
    }
}
