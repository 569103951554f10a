//! Per-axis Sturm–Liouville spectra for `V'' = -α V` on `[0, L]` with the
//! Robin conditions `V'(0) = β₁ V(0)` and `V'(L) = β₂ V(L)`.
//!
//! Three kinds of mode can appear:
//!
//! * positive modes `α = λ² > 0`, roots of `tan(λL) = λ(β₁-β₂)/(β₁β₂+λ²)`;
//! * at most one negative mode `α = -λ̃²`, root of
//!   `tanh(λ̃L) = λ̃(β₁-β₂)/(β₁β₂-λ̃²)`;
//! * a zero mode `V = 1 + β₁ν` when `β₂ = β₁/(1+β₁L)`.
//!
//! All root finding is done in the dimensionless variable `u = λL` on
//! pole-free rewrites of the characteristic equations, so every bracket has
//! finite endpoint values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// One spatial axis of the room.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    /// Axis length `L` in metres.
    pub length: f64,
    /// Molecular diffusivity `K` in m²/s.
    pub diffusivity: f64,
    /// Deposition velocity at `ν = 0`, in m/s.
    pub deposition_lo: f64,
    /// Deposition velocity at `ν = L`, in m/s.
    pub deposition_hi: f64,
}

impl AxisSpec {
    pub fn new(length: f64, diffusivity: f64, deposition_lo: f64, deposition_hi: f64) -> Result<Self> {
        let axis = Self {
            length,
            diffusivity,
            deposition_lo,
            deposition_hi,
        };
        axis.validate("axis")?;
        Ok(axis)
    }

    /// Axis described directly by its Robin coefficients, with unit
    /// diffusivity.
    pub fn from_betas(length: f64, beta_lo: f64, beta_hi: f64) -> Result<Self> {
        Self::new(length, 1.0, beta_lo, beta_hi)
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let non_negative = |v: f64| v.is_finite() && v >= 0.0;
        if !positive(self.length) {
            return Err(Error::invalid(format!("{field}.length"), "must be finite and > 0"));
        }
        if !positive(self.diffusivity) {
            return Err(Error::invalid(format!("{field}.diffusivity"), "must be finite and > 0"));
        }
        if !non_negative(self.deposition_lo) {
            return Err(Error::invalid(format!("{field}.deposition_lo"), "must be finite and >= 0"));
        }
        if !non_negative(self.deposition_hi) {
            return Err(Error::invalid(format!("{field}.deposition_hi"), "must be finite and >= 0"));
        }
        if !self.beta_lo().is_finite() || !self.beta_hi().is_finite() {
            return Err(Error::invalid(format!("{field}"), "deposition/diffusivity ratio overflows"));
        }
        Ok(())
    }

    pub fn beta_lo(&self) -> f64 {
        self.deposition_lo / self.diffusivity
    }

    pub fn beta_hi(&self) -> f64 {
        self.deposition_hi / self.diffusivity
    }

    /// `(β₁-β₂)/(β₁β₂)`: the axis length at which the lowest non-negative
    /// mode passes through zero. Infinite when `β₂ = 0`.
    pub fn critical_length(&self) -> f64 {
        let (b1, b2) = (self.beta_lo(), self.beta_hi());
        (b1 - b2) / (b1 * b2)
    }

    /// Dimensionless Robin numbers `(β₁L, β₂L)`.
    fn biot(&self) -> (f64, f64) {
        (self.beta_lo() * self.length, self.beta_hi() * self.length)
    }
}

/// Root-solver tolerances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSettings {
    /// Relative tolerance on `λL`.
    pub root_tol: f64,
    /// Absolute band on `|β₂ - β₁/(1+β₁L)|` that counts as a zero mode.
    pub zero_mode_tol: f64,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        Self {
            root_tol: 1e-12,
            zero_mode_tol: 1e-12,
        }
    }
}

impl SpectrumSettings {
    pub fn validate(&self) -> Result<()> {
        check_tol(self.root_tol)?;
        if !(self.zero_mode_tol.is_finite() && self.zero_mode_tol >= 0.0) {
            return Err(Error::invalid("zero_mode_tol", "must be finite and >= 0"));
        }
        Ok(())
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol <= 1e-6) {
        return Err(Error::invalid("tol", format!("{tol} outside (0, 1e-6]")));
    }
    Ok(())
}

/// The solved mode set of one axis.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenSpectrum {
    pub axis: AxisSpec,
    /// Strictly increasing positive roots `λₙ` in 1/m.
    pub positive_roots: Vec<f64>,
    pub negative_root: Option<f64>,
    pub zero_mode: bool,
    /// Number of positive roots requested.
    pub count: usize,
}

impl EigenSpectrum {
    pub fn solve(axis: AxisSpec, count: usize, settings: &SpectrumSettings) -> Result<Self> {
        axis.validate("axis")?;
        settings.validate()?;
        let zero_mode = detect_zero_mode(&axis, settings.zero_mode_tol);
        let positive_roots = positive_roots(&axis, count, settings.root_tol, zero_mode)?;
        let negative_root = if zero_mode {
            None
        } else {
            solve_negative_eigenvalue(&axis, settings.root_tol)?
        };
        Ok(Self {
            axis,
            positive_roots,
            negative_root,
            zero_mode,
            count,
        })
    }

    pub fn beta_lo(&self) -> f64 {
        self.axis.beta_lo()
    }

    pub fn length(&self) -> f64 {
        self.axis.length
    }
}

/// `true` when `β₂ = β₁/(1+β₁L)` within `degenerate_tol`, in which case
/// `V(ν) = β₁ν + 1` is a steady-state eigenfunction.
pub fn detect_zero_mode(axis: &AxisSpec, degenerate_tol: f64) -> bool {
    let (b1, b2) = (axis.beta_lo(), axis.beta_hi());
    (b2 - b1 / (1.0 + b1 * axis.length)).abs() <= degenerate_tol
}

/// The first `count` positive roots of the characteristic equation.
///
/// When the axis carries a zero mode the root that would otherwise sit in
/// `(0, π/2L)` has collapsed onto it and is not reported here.
pub fn solve_positive_eigenvalues(axis: &AxisSpec, count: usize, tol: f64) -> Result<Vec<f64>> {
    axis.validate("axis")?;
    check_tol(tol)?;
    let zero = detect_zero_mode(axis, SpectrumSettings::default().zero_mode_tol);
    positive_roots(axis, count, tol, zero)
}

fn positive_roots(axis: &AxisSpec, count: usize, tol: f64, zero_mode: bool) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::invalid("count", "at least one positive root is required"));
    }
    let (b1, b2) = axis.biot();
    let l = axis.length;
    if b1 == b2 {
        return Ok((1..=count).map(|k| k as f64 * PI / l).collect());
    }
    let has_k0 = b1 > b2 && !zero_mode && b1 * b2 < b1 - b2;
    let first_k = if has_k0 { 0 } else { 1 };
    let solve = |i: usize| -> Result<f64> {
        let k = first_k + i;
        let (lo, hi) = positive_bracket(b1, b2, k);
        let g = |u: f64| char_positive(b1, b2, u);
        let u = solve_bracketed(g, lo, hi, guard_for(b1, b2), tol, i + 1)?;
        Ok(u / l)
    };
    if count >= 512 {
        (0..count).into_par_iter().map(solve).collect()
    } else {
        (0..count).map(solve).collect()
    }
}

/// Bracket for the `k`-th root in `u = λL`.
fn positive_bracket(b1: f64, b2: f64, k: usize) -> (f64, f64) {
    let kf = k as f64;
    if b1 < b2 {
        ((kf - 0.5) * PI, kf * PI)
    } else if k == 0 {
        (0.0, FRAC_PI_2)
    } else {
        (kf * PI, (kf + 0.5) * PI)
    }
}

/// Which bracket ends sit on a tangent asymptote: `(lo_is_pole, hi_is_pole)`.
fn guard_for(b1: f64, b2: f64) -> (bool, bool) {
    if b1 < b2 {
        (true, false)
    } else {
        (false, true)
    }
}

/// `sin(u)(B₁B₂+u²)/u - (B₁-B₂)cos(u)`: the positive characteristic
/// equation multiplied through by `cos(u)(B₁B₂+u²)/u`.
pub(crate) fn char_positive(b1: f64, b2: f64, u: f64) -> f64 {
    let sinc = if u.abs() < 1e-4 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    };
    sinc * (b1 * b2 + u * u) - (b1 - b2) * u.cos()
}

/// `tanh(w)(B₁B₂-w²)/w - (B₁-B₂)`: the negative characteristic equation
/// without its pole at `w = √(B₁B₂)`.
pub(crate) fn char_negative(b1: f64, b2: f64, w: f64) -> f64 {
    let tanhc = if w.abs() < 1e-4 {
        1.0 - w * w / 3.0
    } else {
        w.tanh() / w
    };
    tanhc * (b1 * b2 - w * w) - (b1 - b2)
}

/// The negative root `λ̃`, if the axis has one.
///
/// Exists when `β₁ < β₂`, or when `β₁ > β₂` and `L > (β₁-β₂)/(β₁β₂)`.
/// For `β₁ = β₂ = β > 0` the function `e^{βν}` satisfies both boundary
/// conditions with `λ̃ = β`, and that root is returned.
pub fn solve_negative_eigenvalue(axis: &AxisSpec, tol: f64) -> Result<Option<f64>> {
    axis.validate("axis")?;
    check_tol(tol)?;
    let (b1, b2) = axis.biot();
    let l = axis.length;
    let h = |w: f64| char_negative(b1, b2, w);
    let geo = (b1 * b2).sqrt();

    if b1 == b2 {
        return Ok((b1 > 0.0).then(|| b1 / l));
    }
    if b1 < b2 {
        let lo = geo;
        let mut hi = geo + 1.0;
        let mut doublings = 0;
        while h(hi) > 0.0 {
            if doublings == 60 {
                return Err(Error::Solver {
                    interval: 0,
                    reason: "no sign change for the negative root within 60 bracket doublings".into(),
                });
            }
            hi *= 2.0;
            doublings += 1;
        }
        let w = solve_bracketed(h, lo, hi, (false, false), tol, 0)?;
        return Ok(Some(w / l));
    }
    if b1 * b2 > b1 - b2 {
        let w = solve_bracketed(h, 0.0, geo, (false, false), tol, 0)?;
        return Ok(Some(w / l));
    }
    Ok(None)
}

/// Relative inset applied at bracket ends that sit on a tangent asymptote.
const ASYMPTOTE_GUARD: f64 = 1e-9 * PI;

/// Secant point of a converged bracket, using fresh end values since the
/// Illinois iteration scales them. A root at a bracket end can put the
/// secant point one ulp outside, so it is clamped.
fn secant_inside<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let c = (a * fb - b * fa) / (fb - fa);
    if c.is_finite() {
        c.clamp(a, b)
    } else {
        0.5 * (a + b)
    }
}

/// Bracketed root of `f` on `[lo, hi]` by Illinois-modified regula falsi
/// with forced bisection whenever a step fails to halve the bracket.
///
/// `guard` marks asymptote ends, which are first pulled inward by
/// [`ASYMPTOTE_GUARD`]; if the inset ends do not bracket a sign change the
/// exact ends are used, which is safe because `f` is pole-free.
fn solve_bracketed<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    guard: (bool, bool),
    tol: f64,
    interval: usize,
) -> Result<f64> {
    let mut a = if guard.0 { lo + ASYMPTOTE_GUARD } else { lo };
    let mut b = if guard.1 { hi - ASYMPTOTE_GUARD } else { hi };
    let mut fa = f(a);
    let mut fb = f(b);
    if fa.signum() == fb.signum() && fa != 0.0 && fb != 0.0 {
        a = lo;
        b = hi;
        fa = f(a);
        fb = f(b);
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::Solver {
            interval,
            reason: format!("no sign change on [{lo}, {hi}] (f = {fa:e}, {fb:e})"),
        });
    }

    let mut side = 0i8;
    let mut bisect = false;
    for _ in 0..400 {
        let width = b - a;
        if width <= tol * a.abs().max(b.abs()).max(1.0) {
            return Ok(secant_inside(&f, a, b));
        }
        let mid = 0.5 * (a + b);
        let mut c = if bisect { mid } else { (a * fb - b * fa) / (fb - fa) };
        if !(c > a && c < b) {
            c = mid;
        }
        let fc = f(c);
        if fc == 0.0 {
            return Ok(c);
        }
        if !fc.is_finite() {
            return Err(Error::Solver {
                interval,
                reason: format!("non-finite residual at u = {c}"),
            });
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
        bisect = b - a > 0.5 * width;
    }
    Err(Error::Solver {
        interval,
        reason: "iteration budget exhausted".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> SpectrumSettings {
        SpectrumSettings::default()
    }

    fn tan_residual(b1: f64, b2: f64, u: f64) -> f64 {
        u.tan() - u * (b1 - b2) / (b1 * b2 + u * u)
    }

    #[test]
    fn pure_reflection_gives_integer_multiples_of_pi() {
        let roots = solve_positive_eigenvalues(&AxisSpec::from_betas(1.0, 0.0, 0.0).unwrap(), 3, 1e-12).unwrap();
        assert_eq!(roots, vec![PI, 2.0 * PI, 3.0 * PI]);
    }

    #[test]
    fn equal_betas_give_integer_multiples_of_pi() {
        let roots = solve_positive_eigenvalues(&AxisSpec::from_betas(1.0, 5.0, 5.0).unwrap(), 3, 1e-12).unwrap();
        assert_eq!(roots, vec![PI, 2.0 * PI, 3.0 * PI]);
    }

    #[test]
    fn roots_lie_in_their_brackets_and_satisfy_equation() {
        for (b1, b2, l) in [(0.004132, 4132.2, 1.0), (2.0, 1.0, 1.0), (3.0, 0.1, 2.0), (0.0, 7.0, 1.5), (9.0, 0.0, 1.0)] {
            let axis = AxisSpec::from_betas(l, b1, b2).unwrap();
            let spec = EigenSpectrum::solve(axis, 200, &settings()).unwrap();
            let (bb1, bb2) = axis.biot();
            let mut prev = 0.0;
            for (i, lam) in spec.positive_roots.iter().enumerate() {
                let u = lam * l;
                assert!(u > prev);
                prev = u;
                let k = if bb1 > bb2 && bb1 * bb2 < bb1 - bb2 { i } else { i + 1 } as f64;
                if bb1 < bb2 {
                    assert!(u > (k - 0.5) * PI && u < k * PI);
                } else {
                    assert!(u > k * PI && u < (k + 0.5) * PI);
                }
                let slope = 1.0 + u.tan().powi(2);
                assert!(tan_residual(bb1, bb2, u).abs() < 1e-9 * slope.max(1.0), "b=({b1},{b2}) u={u}");
            }
        }
    }

    #[test]
    fn reflecting_lower_wall_has_root_below_half_pi() {
        let axis = AxisSpec::from_betas(1.0, 9.0, 0.0).unwrap();
        let roots = solve_positive_eigenvalues(&axis, 2, 1e-12).unwrap();
        assert!(roots[0] > 0.0 && roots[0] < FRAC_PI_2);
        assert!(roots[1] > PI && roots[1] < 1.5 * PI);
    }

    #[test]
    fn negative_root_absent_without_existence_condition() {
        let axis = AxisSpec::from_betas(1.0, 0.3, 0.2).unwrap();
        assert!(axis.critical_length() > 0.0 && axis.length < axis.critical_length());
        assert_eq!(solve_negative_eigenvalue(&axis, 1e-12).unwrap(), None);
        assert_eq!(solve_negative_eigenvalue(&AxisSpec::from_betas(1.0, 0.0, 0.0).unwrap(), 1e-12).unwrap(), None);
    }

    #[test]
    fn negative_root_for_equal_betas_is_beta() {
        let axis = AxisSpec::from_betas(1.0, 0.7, 0.7).unwrap();
        let w = solve_negative_eigenvalue(&axis, 1e-12).unwrap().unwrap();
        assert!((w - 0.7).abs() < 1e-15);
    }

    #[test]
    fn negative_root_brackets() {
        let axis = AxisSpec::from_betas(1.0, 0.004132, 4132.2).unwrap();
        let w = solve_negative_eigenvalue(&axis, 1e-12).unwrap().unwrap();
        assert!(w > (0.004132f64 * 4132.2).sqrt());
        let r = (w).tanh() - w * (0.004132 - 4132.2) / (0.004132 * 4132.2 - w * w);
        assert!(r.abs() < 1e-10);

        let axis = AxisSpec::from_betas(1.0, 2.0, 1.0).unwrap();
        let w = solve_negative_eigenvalue(&axis, 1e-12).unwrap().unwrap();
        assert!(w > 0.0 && w < 2f64.sqrt());
        assert!(((w).tanh() - w / (2.0 - w * w)).abs() < 1e-12);
    }

    #[test]
    fn zero_mode_detection() {
        assert!(detect_zero_mode(&AxisSpec::from_betas(1.0, 0.0, 0.0).unwrap(), 1e-12));
        assert!(detect_zero_mode(&AxisSpec::from_betas(1.0, 1.0, 0.5).unwrap(), 1e-12));
        assert!(!detect_zero_mode(&AxisSpec::from_betas(1.0, 0.004132, 4132.2).unwrap(), 1e-12));
    }

    #[test]
    fn zero_mode_suppresses_collapsed_roots() {
        let axis = AxisSpec::from_betas(1.0, 1.0, 0.5).unwrap();
        let spec = EigenSpectrum::solve(axis, 3, &settings()).unwrap();
        assert!(spec.zero_mode);
        assert_eq!(spec.negative_root, None);
        assert!(spec.positive_roots[0] > PI);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(AxisSpec::new(0.0, 1.0, 0.0, 0.0).is_err());
        assert!(AxisSpec::new(1.0, -1.0, 0.0, 0.0).is_err());
        assert!(AxisSpec::new(1.0, 1.0, -1e-3, 0.0).is_err());
        let axis = AxisSpec::from_betas(1.0, 0.0, 1.0).unwrap();
        assert!(solve_positive_eigenvalues(&axis, 0, 1e-12).is_err());
        assert!(solve_positive_eigenvalues(&axis, 3, 1e-3).is_err());
    }
}
