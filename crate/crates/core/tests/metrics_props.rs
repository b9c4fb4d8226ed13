use proptest::prelude::*;
use sse_denoise::metrics::{bias, rmse, rsnr, std, std_windowed, Param, ParamSeries};
use sse_denoise::{BrownParams, SignalBlock};

fn series(est: &[f64], truth: &[f64]) -> ParamSeries {
    let p = |v: &[f64]| v.iter().map(|&x| BrownParams::new(x, 10.0, 100.0)).collect::<Vec<_>>();
    ParamSeries::new(p(est), Some(p(truth))).unwrap()
}

proptest! {
    #[test]
    fn rmse_splits_into_spread_and_bias(
        pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 2..200),
    ) {
        // Constant truth so that the spread of the errors is the spread of the estimates.
        let est: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let truth = vec![pairs[0].1; est.len()];
        let s = series(&est, &truth);
        let r = rmse(&s, Param::Swh).unwrap();
        let b = bias(&s, Param::Swh).unwrap();
        let d = std(&s, Param::Swh).unwrap();
        let lhs = r * r;
        let rhs = d * d + b * b;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1e-300) + 1e-15);
    }

    #[test]
    fn windowed_spread_never_exceeds_total(
        values in prop::collection::vec(-100.0..100.0f64, 20..300),
        window in 1usize..40,
    ) {
        prop_assume!(values.len() >= window);
        let s = series(&values, &values);
        let total = std(&s, Param::Swh).unwrap();
        let local = std_windowed(&values, window).unwrap();
        prop_assert!(local <= total * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn rsnr_ignores_joint_scaling(
        data in prop::collection::vec((0.1..100.0f64, -5.0..5.0f64), 12),
        // Powers of two scale without rounding, so equality is exact.
        scale in prop_oneof![Just(0.25), Just(2.0), Just(8.0), Just(1024.0)],
    ) {
        let clean: Vec<f64> = data.iter().map(|d| d.0).collect();
        let est: Vec<f64> = data.iter().map(|d| d.0 + d.1).collect();
        prop_assume!(clean.iter().zip(&est).any(|(a, b)| a != b));
        let block = |v: Vec<f64>| SignalBlock::from_row_major(3, 4, v).unwrap();
        let base = rsnr(&block(clean.clone()), &block(est.clone())).unwrap();
        let scaled = rsnr(
            &block(clean.iter().map(|v| v * scale).collect()),
            &block(est.iter().map(|v| v * scale).collect()),
        ).unwrap();
        prop_assert_eq!(base, scaled);
    }
}
