use crate::error::{Error, Result};
use crate::quadrature::Estimate;

/// Interval budget used by [`quad_adaptive`].
pub const DEFAULT_MAX_INTERVALS: usize = 1 << 22;

/// Adaptive Simpson quadrature with a Richardson-corrected panel value.
///
/// Each accepted panel satisfies `|S₂ - S₁| ≤ 15·abs_tol·width/(b-a)`, so the
/// summed error estimate is bounded by `abs_tol`.
pub fn quad_adaptive<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<Estimate> {
    quad_adaptive_with(f, a, b, abs_tol, DEFAULT_MAX_INTERVALS)
}

pub fn quad_adaptive_with<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Result<Estimate> {
    if !(abs_tol > 0.0) {
        return Err(Error::invalid("oracle.abs_tol", "must be positive"));
    }
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let total = (b - a).abs();
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    let mut stack = vec![(a, b, fa, fm, fb, whole)];
    let mut value = 0.0;
    let mut error = 0.0;
    let mut visited = 0usize;

    while let Some((lo, hi, flo, fmid, fhi, s)) = stack.pop() {
        visited += 1;
        if visited > max_intervals {
            return Err(Error::Integration {
                estimate: value + stack.iter().map(|p| p.5).sum::<f64>() + s,
                error: f64::INFINITY,
                subdivisions: visited,
            });
        }
        let mid = 0.5 * (lo + hi);
        let (lm, rm) = (0.5 * (lo + mid), 0.5 * (mid + hi));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(lo, mid, flo, flm, fmid);
        let right = simpson(mid, hi, fmid, frm, fhi);
        let diff = left + right - s;
        let allowed = 15.0 * abs_tol * (hi - lo).abs() / total;
        let unsplittable = lm <= lo.min(mid) || rm >= hi.max(mid) || lm == mid || rm == mid;
        if !diff.is_finite() {
            return Err(Error::Integration {
                estimate: f64::NAN,
                error: f64::INFINITY,
                subdivisions: visited,
            });
        }
        if diff.abs() <= allowed || unsplittable {
            value += left + right + diff / 15.0;
            error += diff.abs() / 15.0;
        } else {
            stack.push((mid, hi, fmid, frm, fhi, right));
            stack.push((lo, mid, flo, flm, fmid, left));
        }
    }
    Ok(Estimate { value, error })
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}
