use monotone_euler::model::builtin_cubic_multiplicative;
use monotone_euler::paths::generate;
use monotone_euler::taming::{ramp_r, ramp_t, TamedDrift, TamingRadius};
use proptest::prelude::*;

proptest! {
    #[test]
    fn ramps_stay_in_unit_interval_and_are_monotone(s in 2.5f64..1e3, a in 0.0f64..2e3, b in 0.0f64..2e3) {
        let radius = TamingRadius::Finite(s);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for v in [ramp_t(lo, radius), ramp_t(hi, radius), ramp_r(lo, radius), ramp_r(hi, radius)] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(ramp_t(lo, radius) >= ramp_t(hi, radius));
        prop_assert!(ramp_r(lo, radius) <= ramp_r(hi, radius));
        // r switches on only after t has reached its plateau
        prop_assert!(ramp_r(lo, radius) == 0.0 || ramp_t(lo, radius) == 1.0 || ramp_r(lo, radius) == 1.0);
    }

    #[test]
    fn coarsening_preserves_the_path_sum(seed in any::<u64>(), trial in 0u64..1000, k in 0u32..4) {
        let g = generate(seed, trial, 256, 1.0, 1).unwrap();
        let c = g.coarsen(1 << k).unwrap();
        prop_assert_eq!(c.steps(), 256 >> k);
        let total: f64 = g.increments().iter().sum();
        let coarse: f64 = c.increments().iter().sum();
        prop_assert!((total - coarse).abs() < 1e-12);
    }

    #[test]
    fn tamed_cubic_drift_is_strongly_monotone(k in 4u32..20, x in -40.0f64..40.0, y in -40.0f64..40.0) {
        let p = builtin_cubic_multiplicative();
        let td = TamedDrift::new(&p, 1u64 << k, 0.5).unwrap();
        let (bx, by) = (td.eval_vec(&[x]), td.eval_vec(&[y]));
        let d = x - y;
        let lhs = (bx[0] - by[0]) * d + p.monotonicity() * d * d;
        prop_assert!(lhs <= 1e-9 * (1.0 + d * d), "x={} y={} lhs={}", x, y, lhs);
    }
}
