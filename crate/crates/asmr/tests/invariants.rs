//! Property tests over randomized partition schemes and models.

use proptest::prelude::*;

use asmr::coords::{normalize_digit, PartitionScheme};
use asmr::metrics::psnr;
use asmr::model::AsmrModel;

/// Random bases for one axis: 1-4 per level, at least one level above 1.
fn axis_bases(levels: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(1usize..=4, levels).prop_map(|mut b| {
        if b.iter().all(|&v| v == 1) {
            b[0] = 2;
        }
        b
    })
}

fn scheme_strategy() -> impl Strategy<Value = PartitionScheme> {
    (1usize..=3, 1usize..=5).prop_flat_map(|(d, levels)| {
        proptest::collection::vec(axis_bases(levels), d).prop_map(|bases| {
            let extents: Vec<usize> = bases.iter().map(|b| b.iter().product()).collect();
            PartitionScheme::new(&bases, &extents).expect("products match by construction")
        })
    })
}

proptest! {
    #[test]
    fn decompose_recompose_round_trips(
        scheme in scheme_strategy(),
        picker in proptest::collection::vec(0.0f64..1.0, 3),
    ) {
        let x: Vec<usize> = scheme
            .extents()
            .iter()
            .zip(&picker)
            .map(|(&e, p)| ((p * e as f64) as usize).min(e - 1))
            .collect();
        let digits = scheme.decompose(&x).unwrap();
        prop_assert_eq!(scheme.recompose(&digits).unwrap(), x);
        for (level, dv) in digits.iter().enumerate() {
            for (axis, &v) in dv.iter().enumerate() {
                let base = scheme.base(axis, level);
                prop_assert!(v < base.max(1));
                let n = normalize_digit(v, base);
                prop_assert!((-1.0..=1.0).contains(&n));
            }
        }
    }

    #[test]
    fn parse_display_round_trips(scheme in scheme_strategy()) {
        let text = scheme.to_string();
        let back = PartitionScheme::parse(&text).unwrap();
        prop_assert_eq!(back.bases_per_axis(), scheme.bases_per_axis());
        prop_assert_eq!(back.extents(), scheme.extents());
    }

    #[test]
    fn shared_forward_matches_naive(
        scheme in scheme_strategy().prop_filter("keep grids small", |s| s.total_points() <= 512),
        hidden in 2usize..=6,
        seed in 0u64..1000,
    ) {
        let mut widths = vec![scheme.dim()];
        widths.extend(std::iter::repeat(hidden).take(scheme.levels().saturating_sub(1)));
        widths.push(1);
        let model = AsmrModel::init(&widths, 30.0, scheme.clone(), seed).unwrap();
        let shared = model.forward_shared(None).unwrap();
        let naive = model.forward_naive(&scheme.all_coords(), None).unwrap();
        for (a, b) in shared.data().iter().zip(naive.data()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn psnr_is_symmetric_and_scale_aware(
        values in proptest::collection::vec(-1.0f64..1.0, 8..64),
        offset in 0.01f64..0.5,
    ) {
        let shifted: Vec<f64> = values.iter().map(|v| v + offset).collect();
        let ab = psnr(&values, &shifted, 2.0).unwrap();
        let ba = psnr(&shifted, &values, 2.0).unwrap();
        prop_assert_eq!(ab, ba);
        // doubling the stated peak adds exactly 20 log10(2) dB
        let wide = psnr(&values, &shifted, 4.0).unwrap();
        prop_assert!((wide - ab - 20.0 * 2f64.log10()).abs() < 1e-9);
    }
}
