mod common;

use aerodiff::oracle::{fdm_evolve_1d, fdm_evolve_3d, Grid1d, Grid3d, RobinClosure, StepConfig};
use aerodiff::scenario::{fdm_check_1d, residuals};
use aerodiff::{AxisSpec, Room};

#[test]
fn series_matches_crank_nicolson_for_scenario_c() {
    let cfg = common::config("fig5c.toml");
    let check = cfg.validation.as_ref().and_then(|v| v.fdm).expect("fdm section");
    let row = fdm_check_1d(&cfg, &check).unwrap();
    assert!(row.passed(), "{row:?}");
    assert!(row.error < 1e-3, "{row:?}");
}

#[test]
fn scenario_c_residuals_are_small() {
    let cfg = common::config("fig5c.toml");
    let rows = residuals(&cfg).unwrap();
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert!(r.worst_relative() < 1e-8, "{r:?}");
    }
}

fn bump(length: f64, centre: f64, width: f64) -> impl Fn(f64) -> f64 {
    move |x| (-(x - centre).powi(2) / (2.0 * width * width)).exp() + 0.1 * (x / length)
}

/// Largest ADI deviation from the tensor product of 1-D Crank–Nicolson
/// runs, relative to the field maximum.
fn splitting_gap(dt: f64) -> f64 {
    let k = 2.42e-5;
    let room = Room {
        x: AxisSpec::new(0.4, k, 1e-4, 1e-3).unwrap(),
        y: AxisSpec::new(0.5, k, 0.0, 2e-4).unwrap(),
        z: AxisSpec::new(0.6, k, 5e-4, 0.0).unwrap(),
    };
    let nodes = [21, 26, 31];
    let lengths = room.lengths();
    let step = StepConfig::new(dt, RobinClosure::Series);
    let span = (0.0, 200.0);

    let initial: Vec<Grid1d> = (0..3)
        .map(|a| Grid1d::from_fn(lengths[a], nodes[a], bump(lengths[a], 0.45 * lengths[a], 0.08)))
        .collect();
    let lines: Vec<Grid1d> = (0..3).map(|a| fdm_evolve_1d(&room.axes()[a], &initial[a], span, &step).unwrap()).collect();
    let grid = Grid3d::separable(lengths, [&initial[0].values, &initial[1].values, &initial[2].values]);
    let out = fdm_evolve_3d(&room, &grid, span, &step).unwrap();

    let expected = Grid3d::separable(lengths, [&lines[0].values, &lines[1].values, &lines[2].values]);
    let scale = expected.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    out.values
        .iter()
        .zip(&expected.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale
}

#[test]
fn adi_on_separable_data_matches_product_of_line_solves() {
    // The factored step differs from the tensor-product step by a
    // third-order term per step, so the gap closes at second order.
    let coarse = splitting_gap(1.0);
    let fine = splitting_gap(0.5);
    assert!(coarse < 1e-5, "gap {coarse:e}");
    let order = (coarse / fine).log2();
    assert!((1.8..2.2).contains(&order), "gaps {coarse:e} -> {fine:e}, order {order}");
}

#[test]
fn adi_conserves_mass_in_a_reflecting_box() {
    let k = 2.42e-5;
    let room = Room {
        x: AxisSpec::new(0.3, k, 0.0, 0.0).unwrap(),
        y: AxisSpec::new(0.4, k, 0.0, 0.0).unwrap(),
        z: AxisSpec::new(0.5, k, 0.0, 0.0).unwrap(),
    };
    let nodes = [16, 21, 26];
    let lengths = room.lengths();
    let f: Vec<Vec<f64>> = (0..3)
        .map(|a| Grid1d::from_fn(lengths[a], nodes[a], bump(lengths[a], 0.3 * lengths[a], 0.05)).values)
        .collect();
    let grid = Grid3d::separable(lengths, [&f[0], &f[1], &f[2]]);
    let out = fdm_evolve_3d(&room, &grid, (0.0, 300.0), &StepConfig::new(2.0, RobinClosure::Series)).unwrap();
    let mass = |g: &Grid3d| {
        let w = |n: usize, i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let mut m = 0.0;
        for i in 0..nodes[0] {
            for j in 0..nodes[1] {
                for l in 0..nodes[2] {
                    m += w(nodes[0], i) * w(nodes[1], j) * w(nodes[2], l) * g.values[g.index(i, j, l)];
                }
            }
        }
        m
    };
    let (m0, m1) = (mass(&grid), mass(&out));
    assert!((m1 - m0).abs() < 1e-12 * m0, "{m0} -> {m1}");
}

#[test]
fn bad_oracle_inputs_are_rejected() {
    let axis = AxisSpec::new(1.0, 2.42e-5, 0.0, 0.0).unwrap();
    let g = Grid1d::from_fn(1.0, 11, |x| x);
    assert!(fdm_evolve_1d(&axis, &g, (0.0, 1.0), &StepConfig::new(0.0, RobinClosure::Series)).is_err());
    assert!(fdm_evolve_1d(&axis, &g, (1.0, 0.0), &StepConfig::new(0.1, RobinClosure::Series)).is_err());
}
