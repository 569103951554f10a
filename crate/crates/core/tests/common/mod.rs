#![allow(dead_code)]

use std::path::PathBuf;

use aerodiff::eigenspectrum::{solve_negative_eigenvalue, AxisSpec, EigenSpectrum, SpectrumSettings};
use aerodiff::oracle::{negative_scan_window, scan_negative_roots, scan_positive_roots};
use aerodiff::scenario::ScenarioConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn config(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Random axis in Robin-coefficient form: `L` in `[0.2, 5]` m and Biot
/// numbers `βL` log-uniform in `[1e-3, 1e3]`.
pub fn random_axis(rng: &mut impl Rng) -> (f64, f64, f64) {
    let l = rng.random_range(0.2..5.0);
    let b1 = 10f64.powf(rng.random_range(-3.0..3.0)) / l;
    let b2 = 10f64.powf(rng.random_range(-3.0..3.0)) / l;
    (l, b1, b2)
}

pub fn random_axes(count: usize, seed: u64) -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_axis(&mut rng)).collect()
}

/// Compare the production spectrum of one axis with the dense-scan oracle:
/// the closed-form negative-root condition, the scanned negative root and
/// the first `positive` positive roots.
pub fn check_axis_against_scan(l: f64, b1: f64, b2: f64, positive: usize) -> Result<(), String> {
    let axis = AxisSpec::from_betas(l, b1, b2).map_err(|e| e.to_string())?;
    let spec = EigenSpectrum::solve(axis, positive, &SpectrumSettings::default()).map_err(|e| e.to_string())?;
    let tag = format!("L={l} b1={b1} b2={b2}");

    let expect_negative = b1 < b2 || (b1 > b2 && l > (b1 - b2) / (b1 * b2));
    let (w_lo, w_hi) = negative_scan_window(l, b1, b2);
    let scanned = scan_negative_roots(l, b1, b2, w_lo, w_hi, 4000);
    if spec.zero_mode {
        return Err(format!("{tag}: unexpected zero mode"));
    }
    match (expect_negative, spec.negative_root, scanned.as_slice()) {
        (true, Some(r), [s]) => {
            if (r - s).abs() > 1e-6 * s {
                return Err(format!("{tag}: negative root {r} vs scan {s}"));
            }
        }
        (false, None, []) => {}
        (e, r, s) => return Err(format!("{tag}: negative root expected={e} solver={r:?} scan={s:?}")),
    }

    let step = 1e-3f64.min(0.05 * std::f64::consts::PI);
    let scan = scan_positive_roots(l, b1, b2, positive, step);
    if scan.len() != positive || spec.positive_roots.len() != positive {
        return Err(format!("{tag}: {} scanned vs {} solved positive roots", scan.len(), spec.positive_roots.len()));
    }
    for (n, (r, s)) in spec.positive_roots.iter().zip(&scan).enumerate() {
        if (r - s).abs() > 1e-8 * s {
            return Err(format!("{tag}: positive root {n}: {r} vs scan {s}"));
        }
    }
    Ok(())
}

/// Axes tuned to carry a zero mode (`β₂ = β₁/(1+β₁L)`): the solver must
/// report it and find no negative root, and the scan must see none either.
pub fn check_zero_mode_axis(l: f64, b1: f64) -> Result<(), String> {
    let b2 = b1 / (1.0 + b1 * l);
    let axis = AxisSpec::from_betas(l, b1, b2).map_err(|e| e.to_string())?;
    let spec = EigenSpectrum::solve(axis, 4, &SpectrumSettings::default()).map_err(|e| e.to_string())?;
    if !spec.zero_mode || spec.negative_root.is_some() {
        return Err(format!("L={l} b1={b1}: zero={} negative={:?}", spec.zero_mode, spec.negative_root));
    }
    let (w_lo, w_hi) = negative_scan_window(l, b1, b2);
    let scanned = scan_negative_roots(l, b1, b2, w_lo.max(1e-4), w_hi, 4000);
    if !scanned.is_empty() {
        return Err(format!("L={l} b1={b1}: scan found negative roots {scanned:?}"));
    }
    let direct = solve_negative_eigenvalue(&axis, 1e-12).map_err(|e| e.to_string())?;
    if let Some(r) = direct {
        if r * l > 1e-3 {
            return Err(format!("L={l} b1={b1}: stray negative root {r}"));
        }
    }
    Ok(())
}
