use aerodiff::detection::{miss_detection_probability, ml_threshold, q_function, DetectorSpec};
use aerodiff::oracle::monte_carlo_pmd;
use proptest::prelude::*;

const MC_CASES: [(f64, f64, f64, f64); 4] = [(1.0, 1.0, 1.0, 1.0), (0.8, 0.5, 0.2, 2.5), (0.3, 0.9, 4.0, 12.0), (1.0, 0.1, 1e-3, 0.5)];

#[test]
fn monte_carlo_matches_the_decision_rule() {
    // With N ~ N(0, σ²) a miss is N ≤ -ηγc/2, which has probability Q(ηγc/2σ).
    for (i, &(eta, gamma, sigma2, c)) in MC_CASES.iter().enumerate() {
        let exact = q_function(eta * gamma * c / (2.0 * sigma2.sqrt()));
        let mc = monte_carlo_pmd(eta, gamma, sigma2, c, 1_000_000, 11 + i as u64).unwrap();
        assert!(mc.z_score(exact) < 3.0, "case {i}: exact {exact} vs {mc:?}");
    }
}

#[test]
fn closed_form_pmd_is_the_decision_rule_with_doubled_variance() {
    for (i, &(eta, gamma, sigma2, c)) in MC_CASES.iter().enumerate() {
        let p = miss_detection_probability(&DetectorSpec::physical(eta, gamma, sigma2), c, 1.0).unwrap();
        let mc = monte_carlo_pmd(eta, gamma, 2.0 * sigma2, c, 1_000_000, 21 + i as u64).unwrap();
        assert!(mc.z_score(p) < 3.0, "case {i}: closed form {p} vs {mc:?}");
    }
}

#[test]
fn decision_threshold_sits_halfway() {
    let det = DetectorSpec::physical(0.5, 0.4, 1.0);
    assert!((ml_threshold(&det, 10.0).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn lumped_and_physical_forms_agree_when_consistent() {
    let q_p = 5e12;
    let (eta, gamma, sigma2) = (0.7, 0.2, 3e10);
    let ratio = q_p * (eta * gamma) * (eta * gamma) / (8.0 * sigma2);
    let both = DetectorSpec {
        gamma_ratio: Some(ratio),
        ..DetectorSpec::physical(eta, gamma, sigma2)
    };
    let c = 4.2;
    let from_both = miss_detection_probability(&both, c, q_p).unwrap();
    let from_ratio = miss_detection_probability(
        &DetectorSpec {
            gamma_ratio: Some(ratio),
            ..DetectorSpec::default()
        },
        c,
        q_p,
    )
    .unwrap();
    assert!((from_both - from_ratio).abs() < 1e-14);

    let clash = DetectorSpec {
        gamma_ratio: Some(2.0 * ratio),
        ..DetectorSpec::physical(eta, gamma, sigma2)
    };
    assert!(clash.gamma_ratio_linear(q_p).unwrap_err().is_validation());
}

#[test]
fn invalid_inputs_are_rejected() {
    let det = DetectorSpec::from_db(20.0);
    assert!(miss_detection_probability(&det, -1.0, 1.0).is_err());
    assert!(miss_detection_probability(&det, f64::NAN, 1.0).is_err());
    assert!(miss_detection_probability(&det, 1.0, 0.0).is_err());
    assert!(miss_detection_probability(&DetectorSpec::default(), 1.0, 1.0).is_err());
    assert!(monte_carlo_pmd(1.0, 1.0, 0.0, 1.0, 10, 1).is_err());
}

#[test]
fn nothing_collected_means_a_coin_flip() {
    assert_eq!(miss_detection_probability(&DetectorSpec::from_db(30.0), 0.0, 1.0).unwrap(), 0.5);
    assert_eq!(q_function(0.0), 0.5);
}

proptest! {
    #[test]
    fn pmd_decreases_with_detector_ratio(db in -20.0f64..40.0, step in 0.1f64..5.0, c in 1e-3f64..10.0) {
        let q_p = 10.0;
        let lo = miss_detection_probability(&DetectorSpec::from_db(db), c, q_p).unwrap();
        let hi = miss_detection_probability(&DetectorSpec::from_db(db + step), c, q_p).unwrap();
        prop_assert!(hi < lo || (hi == 0.0 && lo == 0.0), "{lo} -> {hi}");
    }

    #[test]
    fn pmd_decreases_with_collected_amount(c in 1e-3f64..5.0, factor in 1.01f64..3.0, db in -10.0f64..20.0) {
        let det = DetectorSpec::from_db(db);
        let lo = miss_detection_probability(&det, c, 1.0).unwrap();
        let hi = miss_detection_probability(&det, c * factor, 1.0).unwrap();
        prop_assert!(hi < lo || (hi == 0.0 && lo == 0.0), "{lo} -> {hi}");
        prop_assert!((0.0..=0.5).contains(&lo));
    }

    #[test]
    fn dual_parameterisations_give_the_same_pmd(
        eta in 0.05f64..1.0,
        gamma in 0.05f64..1.0,
        sigma2 in 1e-3f64..1e3,
        c in 0.0f64..50.0,
        q_p in 1e-2f64..1e6,
    ) {
        let physical = DetectorSpec::physical(eta, gamma, sigma2);
        let ratio = physical.gamma_ratio_linear(q_p).unwrap();
        let lumped = DetectorSpec { gamma_ratio: Some(ratio), ..DetectorSpec::default() };
        let a = miss_detection_probability(&physical, c, q_p).unwrap();
        let b = miss_detection_probability(&lumped, c, q_p).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300) + 1e-300, "{a} vs {b}");
    }
}
