//! Brute-force root location by dense sign scans of the tangent and
//! hyperbolic-tangent forms of the characteristic equations.
//!
//! These deliberately use the pole-carrying forms
//! `tan(u) = u(B₁-B₂)/(B₁B₂+u²)` and `tanh(w) = w(B₁-B₂)/(B₁B₂-w²)` (with
//! `u = λL`, `w = λ̃L`, `B = βL`) so that they share no code path with the
//! production solver. Sign changes across a pole are discarded by checking
//! that the residual shrinks under bisection.

/// `tan(u) - u(B₁-B₂)/(B₁B₂+u²)`.
fn tan_form(b1: f64, b2: f64, u: f64) -> f64 {
    u.tan() - u * (b1 - b2) / (b1 * b2 + u * u)
}

/// `tanh(w) - w(B₁-B₂)/(B₁B₂-w²)`.
fn tanh_form(b1: f64, b2: f64, w: f64) -> f64 {
    w.tanh() - w * (b1 - b2) / (b1 * b2 - w * w)
}

/// Bisect a sign change of `f` on `[a, b]`; `None` when the residual grows
/// instead of shrinking (a pole rather than a root).
fn bisect_root(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> Option<f64> {
    let mut fa = f(a);
    let start = fa.abs().min(f(b).abs());
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    let m = 0.5 * (a + b);
    let end = f(a).abs().min(f(b).abs());
    (end <= start.max(1e-8) && end < 1e-6).then_some(m)
}

/// Scan `f` on the given increasing abscissae and collect bisected roots.
fn scan(f: impl Fn(f64) -> f64 + Copy, grid: impl Iterator<Item = f64>, limit: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for x in grid {
        let fx = f(x);
        if let Some((px, pf)) = prev {
            if pf == 0.0 {
                roots.push(px);
            } else if fx != 0.0 && (pf < 0.0) != (fx < 0.0) {
                if let Some(r) = bisect_root(f, px, x) {
                    roots.push(r);
                }
            }
            if roots.len() >= limit {
                break;
            }
        }
        prev = Some((x, fx));
    }
    roots
}

/// The first `count` positive eigenvalues `λ` (1/m) found by scanning `λL`
/// from `step` upward in increments of `step`.
pub fn scan_positive_roots(length: f64, beta_lo: f64, beta_hi: f64, count: usize, step: f64) -> Vec<f64> {
    let (b1, b2) = (beta_lo * length, beta_hi * length);
    let grid = (1..).map(move |i| i as f64 * step);
    scan(move |u| tan_form(b1, b2, u), grid, count)
        .into_iter()
        .map(|u| u / length)
        .collect()
}

/// Positive eigenvalues whose `λL` lies below `u_max`.
pub fn scan_positive_roots_below(length: f64, beta_lo: f64, beta_hi: f64, u_max: f64, step: f64) -> Vec<f64> {
    let (b1, b2) = (beta_lo * length, beta_hi * length);
    let n = (u_max / step).floor() as usize;
    let grid = (1..=n).map(move |i| i as f64 * step);
    scan(move |u| tan_form(b1, b2, u), grid, usize::MAX)
        .into_iter()
        .map(|u| u / length)
        .collect()
}

/// Negative-eigenvalue roots `λ̃` (1/m) found on a logarithmic grid of
/// `points_per_decade` points spanning `λ̃L ∈ [w_min, w_max]`.
pub fn scan_negative_roots(length: f64, beta_lo: f64, beta_hi: f64, w_min: f64, w_max: f64, points_per_decade: usize) -> Vec<f64> {
    let (b1, b2) = (beta_lo * length, beta_hi * length);
    let (lo, hi) = (w_min.log10(), w_max.log10());
    let n = ((hi - lo) * points_per_decade as f64).ceil() as usize;
    let grid = (0..=n).map(move |i| 10f64.powf(lo + (hi - lo) * i as f64 / n as f64));
    scan(move |w| tanh_form(b1, b2, w), grid, usize::MAX)
        .into_iter()
        .map(|w| w / length)
        .collect()
}

/// Default scan window for [`scan_negative_roots`]: wide enough to contain
/// every root of the hyperbolic equation for the given Biot numbers.
pub fn negative_scan_window(length: f64, beta_lo: f64, beta_hi: f64) -> (f64, f64) {
    let (b1, b2) = (beta_lo * length, beta_hi * length);
    (1e-9, 10.0 * (1.0 + b1 + b2 + (b1 * b2).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn neumann_roots_are_multiples_of_pi() {
        let r = scan_positive_roots(1.0, 0.0, 0.0, 3, 1e-4);
        for (k, v) in r.iter().enumerate() {
            assert!((v - (k + 1) as f64 * PI).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn poles_are_rejected() {
        let r = scan_positive_roots(1.0, 0.2, 5.0, 4, 1e-4);
        for v in &r {
            assert!(tan_form(0.2, 5.0, *v).abs() < 1e-6);
            let frac = (v / PI).fract();
            assert!((frac - 0.5).abs() > 1e-6);
        }
        assert_eq!(r.len(), 4);
    }

    #[test]
    fn negative_root_exists_for_increasing_betas() {
        let (lo, hi) = negative_scan_window(1.0, 0.3, 2.0);
        let r = scan_negative_roots(1.0, 0.3, 2.0, lo, hi, 2000);
        assert_eq!(r.len(), 1);
        assert!(r[0] > (0.6f64).sqrt());
    }

    #[test]
    fn no_negative_root_below_critical_length() {
        let (lo, hi) = negative_scan_window(1.0, 0.3, 0.2);
        assert!(scan_negative_roots(1.0, 0.3, 0.2, lo, hi, 2000).is_empty());
    }
}
