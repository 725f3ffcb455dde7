//! Property tests for the algebraic invariants.

use gmc_lab::gmc::normalize_log_weights;
use gmc_lab::kernel::build_mollifier;
use gmc_lab::spectrum::decay_rate_fit;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // adding a constant to every log-weight leaves the normalized weights
    // and the effective sample size unchanged
    #[test]
    fn log_weight_shift_invariance(
        lws in prop::collection::vec(-40.0f64..40.0, 2..50),
        shift in -200.0f64..200.0,
    ) {
        let (w1, _, ess1) = normalize_log_weights(&lws);
        let shifted: Vec<f64> = lws.iter().map(|x| x + shift).collect();
        let (w2, _, ess2) = normalize_log_weights(&shifted);
        for (a, b) in w1.iter().zip(&w2) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!((ess1 - ess2).abs() < 1e-9 * ess1);
        let total: f64 = w1.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(ess1 >= 1.0 - 1e-12 && ess1 <= lws.len() as f64 + 1e-12);
    }

    // V is symmetric, nonnegative and dominated by V(0) everywhere
    #[test]
    fn kernel_v_bounds(x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let k = build_mollifier(2, 1.0 / 32.0).unwrap();
        let v = k.eval_v(&[x, y]);
        let v_neg = k.eval_v(&[-x, -y]);
        prop_assert!(v >= 0.0);
        prop_assert!(v <= k.v0() + 1e-12);
        prop_assert!((v - v_neg).abs() == 0.0);
    }

    // a noiseless synthetic line is recovered exactly by the weighted fit
    #[test]
    fn rate_fit_recovers_exact_lines(
        slope in -5.0f64..5.0,
        intercept in -10.0f64..10.0,
        n in 4usize..12,
    ) {
        let series: Vec<(f64, f64, f64)> = (0..n)
            .map(|k| {
                let t = 1.0 + k as f64;
                (t, intercept + slope * t, 0.5)
            })
            .collect();
        let fit = decay_rate_fit(&series).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
        prop_assert!((fit.intercept - intercept).abs() < 1e-9);
    }

    // tube membership is translation covariant
    #[test]
    fn tube_translation_covariance(
        shift in -5.0f64..5.0,
        seed in 0u64..1000,
    ) {
        use gmc_lab::paths::{sample_brownian_steps, uniform_distance};
        use gmc_lab::rng::Stream;
        let mut s1 = Stream::new(seed, 0);
        let mut s2 = Stream::new(seed, 1);
        let p = sample_brownian_steps(1, 20, 0.05, &[0.0], &mut s1);
        let q = sample_brownian_steps(1, 20, 0.05, &[0.0], &mut s2);
        let r = 0.9;
        let direct = uniform_distance(&p, &q).unwrap() < r;
        let shift_path = |path: &gmc_lab::paths::Path| {
            let pos: Vec<f64> = (0..=path.steps())
                .map(|i| path.position(i)[0] + shift)
                .collect();
            gmc_lab::paths::Path::from_positions(1, 0.05, pos)
        };
        let translated =
            uniform_distance(&shift_path(&p), &shift_path(&q)).unwrap() < r;
        prop_assert_eq!(direct, translated);
    }
}
