use gkpmod::drive::{Branch, DriveSpec, Harmonics};
use gkpmod::hilbert::delta_from_sharpness;
use gkpmod::linalg::C64;
use gkpmod::modular_measure::outcome_phase;
use gkpmod::release::{ks_two_sample, ReleaseConfig};
use proptest::prelude::*;
use std::f64::consts::PI;

proptest! {
    #[test]
    fn phase_in_half_open_interval(re in -10.0f64..10.0, im in -10.0f64..10.0) {
        let phi = outcome_phase(C64::new(re, im));
        prop_assert!(phi > -PI && phi <= PI);
    }

    #[test]
    fn delta_decreases_with_sharpness(a in 1e-3f64..1.0, b in 1e-3f64..1.0) {
        prop_assume!(a < b);
        prop_assert!(delta_from_sharpness(a) >= delta_from_sharpness(b));
    }

    #[test]
    fn drive_hits_target(delta in 0.05f64..=1.0, t in 0.0f64..40e-9, minus in any::<bool>()) {
        let branch = if minus { Branch::Minus } else { Branch::Plus };
        let spec = DriveSpec { delta, omega_t: 2.0 * PI * 250e6, branch, harmonics: Harmonics::Exact };
        let x = spec.exact_at(t, branch);
        prop_assert!((x.sin() - spec.target(t)).abs() < 1e-12);
    }

    #[test]
    fn release_completeness_bounded(kt in 0.0f64..20.0, steps in 1usize..3000) {
        let cfg = ReleaseConfig::new(1.0, kt).with_steps(steps);
        prop_assume!(cfg.step_leak() < 1.0);
        let s: f64 = cfg.step_weights().iter().map(|w| w * w).sum();
        prop_assert!((s - cfg.completeness()).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&cfg.completeness()));
    }

    #[test]
    fn ks_symmetric(a in prop::collection::vec(-5.0f64..5.0, 1..60), b in prop::collection::vec(-5.0f64..5.0, 1..60)) {
        let ab = ks_two_sample(&a, &b).unwrap();
        let ba = ks_two_sample(&b, &a).unwrap();
        prop_assert!((ab.statistic - ba.statistic).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }
}
