use proptest::prelude::*;

use pmfuse::conflate::{cgasm, gasm, Quantity, SmoothingParams, VdsSeries};
use pmfuse::field::{FieldKind, SpaceTimeField};
use pmfuse::measures::{improvement, MeasureConfig, Totals};
use pmfuse::ttfuse::{blend_vendors, cell_speed, VendorWeights};

fn station_data() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<Option<f64>>>, Vec<Vec<Option<f64>>>)> {
    (2usize..6, 3usize..12).prop_flat_map(|(n, t)| {
        (
            prop::collection::vec(0.2f64..1.0, n),
            prop::collection::vec(prop::collection::vec(prop::option::weighted(0.9, 100.0f64..2500.0), t), n),
            prop::collection::vec(prop::collection::vec(prop::option::weighted(0.9, 5.0f64..80.0), t), n),
        )
            .prop_map(|(gaps, flow, speed)| {
                let pos = gaps
                    .iter()
                    .scan(0.0, |x, g| {
                        *x += g;
                        Some(*x)
                    })
                    .collect();
                (pos, flow, speed)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Reconstructions are convex combinations of the station values.
    #[test]
    fn smoothing_stays_within_input_range((pos, flow, speed) in station_data(), x in -0.5f64..6.0) {
        let series = VdsSeries::new(
            pos,
            1.0,
            SpaceTimeField::from_rows(FieldKind::Flow, &flow),
            SpaceTimeField::from_rows(FieldKind::Speed, &speed),
        )
        .unwrap();
        let p = SmoothingParams::default().without_truncation();
        for q in [Quantity::Flow, Quantity::Speed] {
            let input = series.field(q);
            let lo = input.iter_present().map(|v| v.2).fold(f64::INFINITY, f64::min);
            let hi = input.iter_present().map(|v| v.2).fold(f64::NEG_INFINITY, f64::max);
            for f in [gasm(&series, q, &[x], &p), cgasm(&series, q, &[x], &p)] {
                for (_, _, v) in f.iter_present() {
                    prop_assert!(v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn blending_stays_between_vendors(a in 10.0f64..500.0, b in 10.0f64..500.0, w in 0.01f64..0.99) {
        let weights = VendorWeights::new(vec![w, 1.0 - w]).unwrap();
        let out = blend_vendors(&[vec![Some(a), None], vec![Some(b), Some(b)]], &weights).unwrap();
        let v = out[0].unwrap();
        prop_assert!(v >= a.min(b) - 1e-9 && v <= a.max(b) + 1e-9);
        prop_assert!((out[1].unwrap() - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn capped_cell_speed_never_exceeds_cap(tt in 0.01f64..600.0, len in 0.01f64..1.0) {
        let s = cell_speed(tt, len, 90.0).unwrap();
        prop_assert!(s.mph <= 90.0 && s.mph > 0.0);
        prop_assert_eq!(s.capped, len / tt * 3600.0 > 90.0);
    }

    #[test]
    fn exact_estimates_have_zero_improvement(vmt in 1.0f64..1e5, vht in 1.0f64..1e3, vhd in 1.0f64..1e3, f in 0.5f64..1.5) {
        let truth = Totals { vmt, vht, vhd };
        let est = truth.scaled(f);
        let imp = improvement(&est, &est, &truth);
        prop_assert_eq!(imp.vhd, Some(0.0));
        let better = improvement(&est, &truth, &truth);
        prop_assert!((better.vhd.unwrap() - 100.0 * (f - 1.0).abs()).abs() < 1e-9);
    }

    #[test]
    fn unclamped_delay_is_linear_in_count(q in 0.0f64..500.0, v in 1.0f64..90.0, len in 0.01f64..1.0) {
        let cfg = MeasureConfig { clamp_delay: false, ..MeasureConfig::default() };
        let d1 = cfg.delay(len, q, v);
        let d2 = cfg.delay(len, 2.0 * q, v);
        prop_assert!((d2 - 2.0 * d1).abs() <= 1e-9 * d1.abs().max(1.0));
    }
}
