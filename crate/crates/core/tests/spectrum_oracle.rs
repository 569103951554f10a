mod common;

use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn spectrum_matches_grid_scan(l in 0.2f64..5.0, e1 in -3.0f64..3.0, e2 in -3.0f64..3.0) {
        let (b1, b2) = (10f64.powf(e1) / l, 10f64.powf(e2) / l);
        if let Err(msg) = common::check_axis_against_scan(l, b1, b2, 8) {
            prop_assert!(false, "{}", msg);
        }
    }

    #[test]
    fn zero_mode_axes_have_no_negative_root(l in 0.2f64..5.0, e1 in -2.0f64..2.0) {
        if let Err(msg) = common::check_zero_mode_axis(l, 10f64.powf(e1) / l) {
            prop_assert!(false, "{}", msg);
        }
    }
}

#[test]
fn seeded_axes_match_grid_scan() {
    for (l, b1, b2) in common::random_axes(200, 7) {
        common::check_axis_against_scan(l, b1, b2, 12).unwrap();
    }
}
