//! Instantaneous point-source solutions.
//!
//! A release of strength `Q` at `ν_p` and time `t₀` on one axis evolves as
//!
//! ```text
//! C(ν, t) = Σ_m Q · V_m(ν_p) V_m(ν) / ‖V_m‖² · exp(r_m (t - t₀))
//! ```
//!
//! where `V_m` runs over the positive, negative and zero modes of the axis
//! and `r_m` is the mode's time rate. The 3-D field in a box is the product
//! of three such factors.
//!
//! Every sum in this crate, including the extended-source and sampler
//! integrals, is a special case of the *axis kernel*
//! `G(obs, src, s) = Σ_m obs(V_m) src(V_m) / ‖V_m‖² e^{r_m s}`, where `obs`
//! and `src` are linear functionals ([`Probe`]s) of the mode shape: a point
//! value, a segment integral, or a slope.
//!
//! Negative modes grow like `e^{λ̃ν}` in space. Their values are carried as
//! [`Scaled`] numbers so the large spatial factors cancel against the norm
//! before anything is exponentiated.

use serde::{Deserialize, Serialize};

use crate::eigenspectrum::{AxisSpec, EigenSpectrum, SpectrumSettings};
use crate::error::{Error, Result};

/// Time behaviour attached to the negative mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeModeDynamics {
    /// `e^{-Kλ̃²t}`, the published form.
    #[default]
    Decaying,
    /// `e^{+Kλ̃²t}`, the form that solves the diffusion equation for a mode
    /// with `V'' = +λ̃²V`.
    Growing,
}

/// Series-evaluation settings shared by all modules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeriesSettings {
    /// Number of positive roots solved per axis, which caps every sum.
    pub max_modes: usize,
    pub root_tol: f64,
    pub zero_mode_tol: f64,
    /// Relative tail tolerance for adaptive truncation; `0` sums every mode.
    pub tail_tol: f64,
    pub negative_mode: NegativeModeDynamics,
}

impl Default for SeriesSettings {
    fn default() -> Self {
        Self {
            max_modes: 100_000,
            root_tol: 1e-12,
            zero_mode_tol: 1e-12,
            tail_tol: 1e-12,
            negative_mode: NegativeModeDynamics::Decaying,
        }
    }
}

impl SeriesSettings {
    /// Defaults for extended-source and sampler runs.
    pub fn for_sources() -> Self {
        Self {
            max_modes: 200,
            ..Self::default()
        }
    }

    pub fn spectrum(&self) -> SpectrumSettings {
        SpectrumSettings {
            root_tol: self.root_tol,
            zero_mode_tol: self.zero_mode_tol,
        }
    }

    pub fn truncation(&self) -> Truncation {
        Truncation::Adaptive { tol: self.tail_tol }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_modes == 0 {
            return Err(Error::invalid("series.max_modes", "must be at least 1"));
        }
        if !(self.tail_tol.is_finite() && self.tail_tol >= 0.0) {
            return Err(Error::invalid("series.tail_tol", "must be finite and >= 0"));
        }
        self.spectrum().validate()
    }
}

/// How many positive modes enter a sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Truncation {
    /// Stop once a bound on the remaining tail is below `tol` times the
    /// running sum of absolute terms.
    Adaptive { tol: f64 },
    /// Exactly the first `n` positive modes.
    Fixed(usize),
}

/// A real number stored as `mantissa · e^{log_scale}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scaled {
    pub mantissa: f64,
    pub log_scale: f64,
}

impl Scaled {
    pub const ZERO: Scaled = Scaled {
        mantissa: 0.0,
        log_scale: 0.0,
    };

    pub fn new(mantissa: f64, log_scale: f64) -> Self {
        Self { mantissa, log_scale }
    }

    pub fn plain(v: f64) -> Self {
        Self::new(v, 0.0)
    }

    pub fn value(self) -> f64 {
        self.times_exp(0.0)
    }

    /// `self · e^{x}` as an ordinary float.
    pub fn times_exp(self, x: f64) -> f64 {
        if self.mantissa == 0.0 {
            0.0
        } else {
            self.mantissa * (self.log_scale + x).exp()
        }
    }

    pub fn mul(self, o: Scaled) -> Scaled {
        Scaled::new(self.mantissa * o.mantissa, self.log_scale + o.log_scale)
    }

    pub fn div(self, o: Scaled) -> Scaled {
        Scaled::new(self.mantissa / o.mantissa, self.log_scale - o.log_scale)
    }

    pub fn scale(self, k: f64) -> Scaled {
        Scaled::new(self.mantissa * k, self.log_scale)
    }
}

/// One eigenmode of an axis, identified by its root.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    Zero,
    Negative(f64),
    Positive(f64),
}

/// A linear functional applied to a mode shape.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Probe {
    /// `V(ν)`
    Point(f64),
    /// `∫_a^b V(ν) dν`
    Span(f64, f64),
    /// `V'(ν)`
    Slope(f64),
}

impl Probe {
    /// Non-increasing-in-`λ` (except for slopes) factor such that
    /// `|probe(V_λ)| ≤ factor · √(1 + β²/λ²)` for positive modes.
    fn envelope(self, lambda: f64) -> f64 {
        match self {
            Probe::Point(_) => 1.0,
            Probe::Span(a, b) => (b - a).abs().min(2.0 / lambda),
            Probe::Slope(_) => lambda,
        }
    }

    pub(crate) fn check(self, length: f64, field: &str) -> Result<()> {
        let inside = |v: f64| v.is_finite() && (0.0..=length).contains(&v);
        let ok = match self {
            Probe::Point(v) | Probe::Slope(v) => inside(v),
            Probe::Span(a, b) => inside(a) && inside(b) && a <= b,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(field, format!("{self:?} is outside [0, {length}]")))
        }
    }
}

/// `x - sin x` without cancellation for small `x`.
fn x_minus_sin(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return x - x.sin();
    }
    let x2 = x * x;
    let mut term = x * x2 / 6.0;
    let mut sum = 0.0f64;
    let mut k = 3.0;
    while term.abs() > 1e-18 * sum.abs().max(f64::MIN_POSITIVE) {
        sum += term;
        term *= -x2 / ((k + 1.0) * (k + 2.0));
        k += 2.0;
    }
    sum
}

/// `sinh x - x` without cancellation for small `x`.
fn sinh_minus_x(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return x.sinh() - x;
    }
    let x2 = x * x;
    let mut term = x * x2 / 6.0;
    let mut sum = 0.0f64;
    let mut k = 3.0;
    while term.abs() > 1e-18 * sum.abs().max(f64::MIN_POSITIVE) {
        sum += term;
        term *= x2 / ((k + 1.0) * (k + 2.0));
        k += 2.0;
    }
    sum
}

/// `V(ν) = cos λν + (β/λ) sin λν`.
pub fn shape_pos(lambda: f64, beta: f64, nu: f64) -> f64 {
    let (s, c) = (lambda * nu).sin_cos();
    c + beta / lambda * s
}

fn slope_pos(lambda: f64, beta: f64, nu: f64) -> f64 {
    let (s, c) = (lambda * nu).sin_cos();
    -lambda * s + beta * c
}

fn segment_pos(lambda: f64, beta: f64, a: f64, b: f64) -> f64 {
    let h = 0.5 * (b - a);
    2.0 * (lambda * h).sin() / lambda * shape_pos(lambda, beta, 0.5 * (a + b))
}

/// `‖V‖² = ∫₀^L V² dν` for a positive mode.
pub fn norm_pos(lambda: f64, beta: f64, length: f64) -> f64 {
    let u = lambda * length;
    let r = beta / lambda;
    let su = u.sin();
    ((2.0 * u + (2.0 * u).sin()) + r * r * x_minus_sin(2.0 * u)) / (4.0 * lambda) + beta / (lambda * lambda) * su * su
}

/// `V(ν) = cosh λ̃ν + (β/λ̃) sinh λ̃ν`, scaled by `e^{λ̃ν}`.
pub fn shape_neg(lambda: f64, beta: f64, nu: f64) -> Scaled {
    let r = beta / lambda;
    let e = (-2.0 * lambda * nu).exp();
    Scaled::new(0.5 * (1.0 + r) + 0.5 * (1.0 - r) * e, lambda * nu)
}

fn slope_neg(lambda: f64, beta: f64, nu: f64) -> Scaled {
    let r = beta / lambda;
    let e = (-2.0 * lambda * nu).exp();
    Scaled::new(lambda * (0.5 * (1.0 + r) - 0.5 * (1.0 - r) * e), lambda * nu)
}

fn segment_neg(lambda: f64, beta: f64, a: f64, b: f64) -> Scaled {
    let h = 0.5 * (b - a);
    let mid = shape_neg(lambda, beta, 0.5 * (a + b));
    // 2 sinh(λ̃h)/λ̃ = e^{λ̃h} (1 - e^{-2λ̃h}) / λ̃
    let factor = -(-2.0 * lambda * h).exp_m1() / lambda;
    Scaled::new(mid.mantissa * factor, mid.log_scale + lambda * h)
}

/// `‖V‖²` for the negative mode.
pub fn norm_neg(lambda: f64, beta: f64, length: f64) -> Scaled {
    let u = lambda * length;
    let r = beta / lambda;
    if u <= 0.5 {
        let s2 = (2.0 * u).sinh();
        let su = u.sinh();
        let v = (s2 + 2.0 * u + r * r * sinh_minus_x(2.0 * u)) / (4.0 * lambda) + beta / (lambda * lambda) * su * su;
        return Scaled::plain(v);
    }
    let e2 = (-2.0 * u).exp();
    let e4 = e2 * e2;
    // (sinh 2u ± 2u) e^{-2u} and sinh²u e^{-2u}
    let plus = 0.5 * (1.0 - e4) + 2.0 * u * e2;
    let minus = 0.5 * (1.0 - e4) - 2.0 * u * e2;
    let sq = 0.25 * (1.0 - e2) * (1.0 - e2);
    let mant = (plus + r * r * minus) / (4.0 * lambda) + beta / (lambda * lambda) * sq;
    Scaled::new(mant, 2.0 * u)
}

/// `‖V₀‖²` for the zero mode `V₀ = 1 + βν`.
pub fn norm_zero(beta: f64, length: f64) -> f64 {
    let l = length;
    l + beta * l * l + beta * beta * l * l * l / 3.0
}

/// Apply a probe to any mode shape.
pub fn probe_mode(mode: Mode, beta: f64, probe: Probe) -> Scaled {
    match mode {
        Mode::Positive(l) => Scaled::plain(match probe {
            Probe::Point(v) => shape_pos(l, beta, v),
            Probe::Span(a, b) => segment_pos(l, beta, a, b),
            Probe::Slope(v) => slope_pos(l, beta, v),
        }),
        Mode::Negative(l) => match probe {
            Probe::Point(v) => shape_neg(l, beta, v),
            Probe::Span(a, b) => segment_neg(l, beta, a, b),
            Probe::Slope(v) => slope_neg(l, beta, v),
        },
        Mode::Zero => Scaled::plain(match probe {
            Probe::Point(v) => 1.0 + beta * v,
            Probe::Span(a, b) => (b - a) * (1.0 + 0.5 * beta * (a + b)),
            Probe::Slope(_) => beta,
        }),
    }
}

#[derive(Clone, Debug)]
struct NegativePart {
    lambda: f64,
    norm: Scaled,
    rate: f64,
}

/// A solved axis with everything needed to evaluate kernel sums.
#[derive(Clone, Debug)]
pub struct AxisKernel {
    spectrum: EigenSpectrum,
    beta: f64,
    norms: Vec<f64>,
    rates: Vec<f64>,
    negative: Option<NegativePart>,
    zero_norm: Option<f64>,
}

impl AxisKernel {
    pub fn new(spectrum: EigenSpectrum, dynamics: NegativeModeDynamics) -> Self {
        let beta = spectrum.beta_lo();
        let l = spectrum.length();
        let k = spectrum.axis.diffusivity;
        let norms = spectrum.positive_roots.iter().map(|&lam| norm_pos(lam, beta, l)).collect();
        let rates = spectrum.positive_roots.iter().map(|&lam| -k * lam * lam).collect();
        let negative = spectrum.negative_root.map(|lam| NegativePart {
            lambda: lam,
            norm: norm_neg(lam, beta, l),
            rate: match dynamics {
                NegativeModeDynamics::Decaying => -k * lam * lam,
                NegativeModeDynamics::Growing => k * lam * lam,
            },
        });
        let zero_norm = spectrum.zero_mode.then(|| norm_zero(beta, l));
        Self {
            spectrum,
            beta,
            norms,
            rates,
            negative,
            zero_norm,
        }
    }

    pub fn solve(axis: AxisSpec, settings: &SeriesSettings) -> Result<Self> {
        settings.validate()?;
        let spectrum = EigenSpectrum::solve(axis, settings.max_modes, &settings.spectrum())?;
        Ok(Self::new(spectrum, settings.negative_mode))
    }

    pub fn spectrum(&self) -> &EigenSpectrum {
        &self.spectrum
    }

    pub fn axis(&self) -> &AxisSpec {
        &self.spectrum.axis
    }

    pub fn length(&self) -> f64 {
        self.spectrum.length()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn positive_count(&self) -> usize {
        self.norms.len()
    }

    pub fn positive_norm(&self, n: usize) -> f64 {
        self.norms[n]
    }

    pub fn positive_rate(&self, n: usize) -> f64 {
        self.rates[n]
    }

    pub fn negative_norm(&self) -> Option<Scaled> {
        self.negative.as_ref().map(|n| n.norm)
    }

    pub fn negative_rate(&self) -> Option<f64> {
        self.negative.as_ref().map(|n| n.rate)
    }

    pub fn zero_norm(&self) -> Option<f64> {
        self.zero_norm
    }

    /// Contribution of the negative and zero modes to `G(obs, src, s)`.
    fn nonpositive_terms(&self, obs: Probe, src: Probe, s: f64) -> f64 {
        let mut total = 0.0;
        if let Some(neg) = &self.negative {
            let mode = Mode::Negative(neg.lambda);
            let c = probe_mode(mode, self.beta, obs).mul(probe_mode(mode, self.beta, src)).div(neg.norm);
            total += c.times_exp(neg.rate * s);
        }
        if let Some(norm) = self.zero_norm {
            let c = probe_mode(Mode::Zero, self.beta, obs).value() * probe_mode(Mode::Zero, self.beta, src).value();
            total += c / norm;
        }
        total
    }

    /// `G(obs, src, s)` summed over all modes, with positive modes truncated
    /// according to `truncation`.
    pub fn green(&self, obs: Probe, src: Probe, s: f64, truncation: Truncation) -> f64 {
        let base = self.nonpositive_terms(obs, src, s);
        let beta = self.beta;
        let roots = &self.spectrum.positive_roots;
        base + self.positive_sum(s, truncation, base.abs(), |lam| obs.envelope(lam) * src.envelope(lam), |m| {
            let mode = Mode::Positive(roots[m]);
            probe_mode(mode, beta, obs).mantissa * probe_mode(mode, beta, src).mantissa / self.norms[m]
        })
        .0
    }

    /// Sum `Σ coeff(m) e^{r_m s}` over positive modes.
    ///
    /// `envelope(λ)` must bound `|coeff| · ‖V‖² / (1+β²/λ²)`; the tail bound
    /// divides it by `‖V‖²/(1+β²/λ²) ≥ L/2 - 1/(4λ)`. Returns the sum and
    /// the number of modes used.
    pub(crate) fn positive_sum(
        &self,
        s: f64,
        truncation: Truncation,
        base: f64,
        envelope: impl Fn(f64) -> f64,
        mut coeff: impl FnMut(usize) -> f64,
    ) -> (f64, usize) {
        let roots = &self.spectrum.positive_roots;
        let n = roots.len();
        let l = self.length();
        let (limit, tol) = match truncation {
            Truncation::Adaptive { tol } if tol > 0.0 => (n, tol),
            Truncation::Adaptive { .. } => (n, 0.0),
            Truncation::Fixed(k) => (k.min(n), 0.0),
        };
        let mut sum = 0.0;
        let mut scale = base;
        for m in 0..limit {
            let e = (self.rates[m] * s).exp();
            if m > 0 && e == 0.0 {
                return (sum, m);
            }
            if tol > 0.0 && scale > 0.0 {
                let lam = roots[m];
                let floor = 0.5 * l - 0.25 / lam;
                if floor > 0.0 {
                    let env = envelope(lam);
                    let q = if m + 1 < n {
                        let ratio = (envelope(roots[m + 1]) / env).max(1.0);
                        ((self.rates[m + 1] - self.rates[m]) * s).exp() * ratio
                    } else {
                        0.0
                    };
                    if q < 1.0 && env * e / (floor * (1.0 - q)) <= tol * scale {
                        return (sum, m);
                    }
                }
            }
            let term = coeff(m) * e;
            sum += term;
            scale += term.abs();
        }
        (sum, limit)
    }

    /// Precompute coefficients for a batch of `(obs, src)` probe pairs that
    /// will be evaluated at many elapsed times.
    pub fn table(&self, rows: &[(Probe, Probe)]) -> ModeTable {
        let n = self.positive_count();
        let beta = self.beta;
        let mut coeffs = Vec::with_capacity(rows.len() * n);
        for &(obs, src) in rows {
            for (m, &lam) in self.spectrum.positive_roots.iter().enumerate() {
                let mode = Mode::Positive(lam);
                coeffs.push(probe_mode(mode, beta, obs).mantissa * probe_mode(mode, beta, src).mantissa / self.norms[m]);
            }
        }
        let negative = self.negative.as_ref().map(|neg| {
            let mode = Mode::Negative(neg.lambda);
            rows.iter()
                .map(|&(o, s)| probe_mode(mode, beta, o).mul(probe_mode(mode, beta, s)).div(neg.norm))
                .collect()
        });
        let zero = self.zero_norm.map(|norm| {
            rows.iter()
                .map(|&(o, s)| probe_mode(Mode::Zero, beta, o).value() * probe_mode(Mode::Zero, beta, s).value() / norm)
                .collect()
        });
        ModeTable {
            rows: rows.to_vec(),
            n,
            coeffs,
            negative,
            zero,
        }
    }
}

/// Precomputed kernel coefficients for several probe pairs on one axis.
#[derive(Clone, Debug)]
pub struct ModeTable {
    rows: Vec<(Probe, Probe)>,
    n: usize,
    coeffs: Vec<f64>,
    negative: Option<Vec<Scaled>>,
    zero: Option<Vec<f64>>,
}

impl ModeTable {
    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    /// Evaluate every row at elapsed time `s`, writing into `out`.
    /// Returns the number of positive modes used.
    pub fn eval(&self, kernel: &AxisKernel, s: f64, truncation: Truncation, out: &mut Vec<f64>) -> usize {
        out.clear();
        out.resize(self.rows.len(), 0.0);
        let mut base = 0.0f64;
        if let Some(neg) = &self.negative {
            let rate = kernel.negative_rate().unwrap_or(0.0);
            for (o, c) in out.iter_mut().zip(neg) {
                *o += c.times_exp(rate * s);
            }
        }
        if let Some(zero) = &self.zero {
            for (o, c) in out.iter_mut().zip(zero) {
                *o += c;
            }
        }
        for o in out.iter() {
            base = base.max(o.abs());
        }
        let rows = &self.rows;
        let envelope = |lam: f64| {
            rows.iter()
                .map(|(o, s)| o.envelope(lam) * s.envelope(lam))
                .fold(0.0, f64::max)
        };
        let mut exps = Vec::new();
        let n = self.n;
        let coeffs = &self.coeffs;
        let (_, used) = kernel.positive_sum(s, truncation, base, envelope, |m| {
            let e = (kernel.rates[m] * s).exp();
            exps.push(e);
            (0..rows.len()).map(|j| coeffs[j * n + m].abs()).fold(0.0, f64::max)
        });
        for (j, o) in out.iter_mut().enumerate() {
            let row = &coeffs[j * n..j * n + used];
            *o += row.iter().zip(&exps).map(|(c, e)| c * e).sum::<f64>();
        }
        used
    }
}

/// Source component along one axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisSource {
    pub position: f64,
    pub strength: f64,
    pub release_time: f64,
}

/// Expansion weights of a point release along one axis.
///
/// The weights are stored without their `e^{Kλ²t₀}` factor, which would
/// overflow for high modes; [`ModeWeights::positive_weight`] reattaches it.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeWeights {
    pub release_time: f64,
    /// `Q V_n(ν_p) / ‖V_n‖²`
    pub positive: Vec<f64>,
    /// `Q Ṽ(ν_p) / ‖Ṽ‖²`
    pub negative: Option<Scaled>,
    /// `Q V₀(ν_p) / ‖V₀‖²`
    pub zero: Option<f64>,
    strength: f64,
}

impl ModeWeights {
    pub fn new(kernel: &AxisKernel, source: &AxisSource) -> Result<Self> {
        let l = kernel.length();
        if !(source.position > 0.0 && source.position < l) {
            return Err(Error::invalid(
                "source.position",
                format!("{} must lie strictly inside (0, {l})", source.position),
            ));
        }
        if !(source.strength.is_finite() && source.strength > 0.0) {
            return Err(Error::invalid("source.strength", "must be finite and > 0"));
        }
        if !source.release_time.is_finite() {
            return Err(Error::invalid("source.release_time", "must be finite"));
        }
        let beta = kernel.beta;
        let q = source.strength;
        let p = source.position;
        let positive = kernel
            .spectrum
            .positive_roots
            .iter()
            .zip(&kernel.norms)
            .map(|(&lam, &norm)| q * shape_pos(lam, beta, p) / norm)
            .collect();
        let negative = kernel
            .negative
            .as_ref()
            .map(|neg| shape_neg(neg.lambda, beta, p).div(neg.norm).scale(q));
        let zero = kernel.zero_norm.map(|norm| q * (1.0 + beta * p) / norm);
        Ok(Self {
            release_time: source.release_time,
            positive,
            negative,
            zero,
            strength: q,
        })
    }

    /// `ℓ_n` including the release-time factor `e^{Kλ²t₀}`.
    pub fn positive_weight(&self, kernel: &AxisKernel, n: usize) -> Result<f64> {
        let w = self.positive.get(n).ok_or_else(|| Error::invalid("n", format!("mode {n} not in spectrum")))?;
        Ok(w * (-kernel.rates[n] * self.release_time).exp())
    }

    /// `ℓ̃` including `e^{Kλ̃²t₀}`; absent without a negative mode.
    pub fn negative_weight(&self, kernel: &AxisKernel) -> Option<f64> {
        let neg = kernel.negative.as_ref()?;
        let k = kernel.axis().diffusivity;
        Some(self.negative?.times_exp(k * neg.lambda * neg.lambda * self.release_time))
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }
}

/// `Φ_n(ν, t) = V_n(ν) e^{-Kλ_n² t}` for the `n`-th positive mode (zero-based).
pub fn eigenfunction_pos(kernel: &AxisKernel, n: usize, nu: f64, t: f64) -> Result<f64> {
    let lam = *kernel
        .spectrum
        .positive_roots
        .get(n)
        .ok_or_else(|| Error::invalid("n", format!("mode {n} not in spectrum")))?;
    Probe::Point(nu).check(kernel.length(), "nu")?;
    Ok(shape_pos(lam, kernel.beta, nu) * (kernel.rates[n] * t).exp())
}

/// `Φ̃(ν, t) = Ṽ(ν) e^{r̃ t}` for the negative mode, if present.
pub fn eigenfunction_neg(kernel: &AxisKernel, nu: f64, t: f64) -> Result<Option<f64>> {
    Probe::Point(nu).check(kernel.length(), "nu")?;
    Ok(kernel
        .negative
        .as_ref()
        .map(|neg| shape_neg(neg.lambda, kernel.beta, nu).times_exp(neg.rate * t)))
}

/// `ℓ_n` for the `n`-th positive mode.
pub fn weight_pos(kernel: &AxisKernel, n: usize, source: &AxisSource) -> Result<f64> {
    ModeWeights::new(kernel, source)?.positive_weight(kernel, n)
}

/// `ℓ̃`, absent when the axis has no negative mode.
pub fn weight_neg(kernel: &AxisKernel, source: &AxisSource) -> Result<Option<f64>> {
    Ok(ModeWeights::new(kernel, source)?.negative_weight(kernel))
}

/// One-axis concentration factor `C_ν(ν, t)`.
///
/// Zero before the release; evaluating exactly at the release time is a
/// domain error because the initial condition is a delta function.
pub fn concentration_1d(kernel: &AxisKernel, weights: &ModeWeights, nu: f64, t: f64, truncation: Truncation) -> Result<f64> {
    Probe::Point(nu).check(kernel.length(), "nu")?;
    if let Truncation::Fixed(n) = truncation {
        if n > kernel.positive_count() {
            return Err(Error::invalid("modes", format!("{n} exceeds the {} solved roots", kernel.positive_count())));
        }
    }
    let s = t - weights.release_time;
    if s < 0.0 {
        return Ok(0.0);
    }
    if s == 0.0 {
        return Err(Error::Domain(format!("t = {t} equals the release time; the field is a delta function there")));
    }
    let beta = kernel.beta;
    let mut base = 0.0;
    if let (Some(w), Some(neg)) = (weights.negative, kernel.negative.as_ref()) {
        base += w.mul(shape_neg(neg.lambda, beta, nu)).times_exp(neg.rate * s);
    }
    if let Some(w) = weights.zero {
        base += w * (1.0 + beta * nu);
    }
    let roots = &kernel.spectrum.positive_roots;
    let q = weights.strength;
    let (sum, _) = kernel.positive_sum(s, truncation, base.abs(), |_| q, |m| weights.positive[m] * shape_pos(roots[m], beta, nu));
    Ok(base + sum)
}

/// A box-shaped room.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Room {
    pub x: AxisSpec,
    pub y: AxisSpec,
    pub z: AxisSpec,
}

impl Room {
    pub fn axes(&self) -> [AxisSpec; 3] {
        [self.x, self.y, self.z]
    }

    pub fn lengths(&self) -> [f64; 3] {
        [self.x.length, self.y.length, self.z.length]
    }

    pub fn volume(&self) -> f64 {
        self.x.length * self.y.length * self.z.length
    }

    pub fn validate(&self) -> Result<()> {
        self.x.validate("room.x")?;
        self.y.validate("room.y")?;
        self.z.validate("room.z")
    }

    pub fn check_point(&self, p: [f64; 3], field: &str) -> Result<()> {
        for (i, (&v, l)) in p.iter().zip(self.lengths()).enumerate() {
            if !(v.is_finite() && (0.0..=l).contains(&v)) {
                let axis = ["x", "y", "z"][i];
                return Err(Error::invalid(format!("{field}.{axis}"), format!("{v} outside [0, {l}]")));
            }
        }
        Ok(())
    }
}

/// The three solved axes of a room.
#[derive(Clone, Debug)]
pub struct RoomModel {
    pub room: Room,
    pub kernels: [AxisKernel; 3],
    pub settings: SeriesSettings,
}

impl RoomModel {
    pub fn new(room: Room, settings: SeriesSettings) -> Result<Self> {
        room.validate()?;
        settings.validate()?;
        let [x, y, z] = room.axes();
        let kernels = [
            AxisKernel::solve(x, &settings)?,
            AxisKernel::solve(y, &settings)?,
            AxisKernel::solve(z, &settings)?,
        ];
        Ok(Self { room, kernels, settings })
    }
}

/// Instantaneous point release in the room.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSource {
    pub position: [f64; 3],
    pub strength: f64,
    pub release_time: f64,
}

impl PointSource {
    pub fn validate(&self, room: &Room) -> Result<()> {
        for (i, (&v, l)) in self.position.iter().zip(room.lengths()).enumerate() {
            if !(v > 0.0 && v < l) {
                let axis = ["x", "y", "z"][i];
                return Err(Error::invalid(format!("source.position.{axis}"), format!("{v} must lie strictly inside (0, {l})")));
            }
        }
        if !(self.strength.is_finite() && self.strength > 0.0) {
            return Err(Error::invalid("source.strength", "must be finite and > 0"));
        }
        if !self.release_time.is_finite() {
            return Err(Error::invalid("source.release_time", "must be finite"));
        }
        Ok(())
    }

    /// Per-axis components with the strength carried on `x`.
    pub fn axis_sources(&self) -> [AxisSource; 3] {
        let at = |i: usize, q: f64| AxisSource {
            position: self.position[i],
            strength: q,
            release_time: self.release_time,
        };
        [at(0, self.strength), at(1, 1.0), at(2, 1.0)]
    }
}

/// `C(x, y, z, t) = C_x C_y C_z` for a point release.
pub fn concentration_point_3d(model: &RoomModel, source: &PointSource, point: [f64; 3], t: f64) -> Result<f64> {
    source.validate(&model.room)?;
    model.room.check_point(point, "point")?;
    let s = t - source.release_time;
    if s < 0.0 {
        return Ok(0.0);
    }
    if s == 0.0 {
        return Err(Error::Domain(format!("t = {t} equals the release time; the field is a delta function there")));
    }
    let trunc = model.settings.truncation();
    let mut c = source.strength;
    for (i, kernel) in model.kernels.iter().enumerate() {
        let g = kernel.green(Probe::Point(point[i]), Probe::Point(source.position[i]), s, trunc);
        c *= g;
        if c == 0.0 {
            return Ok(0.0);
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn kernel(l: f64, k: f64, d1: f64, d2: f64, modes: usize) -> AxisKernel {
        let settings = SeriesSettings {
            max_modes: modes,
            ..SeriesSettings::default()
        };
        AxisKernel::solve(AxisSpec::new(l, k, d1, d2).unwrap(), &settings).unwrap()
    }

    #[test]
    fn neumann_eigenfunction_values() {
        let k = kernel(1.0, 1.0, 0.0, 0.0, 4);
        assert_eq!(eigenfunction_pos(&k, 0, 0.0, 0.0).unwrap(), 1.0);
        assert!(eigenfunction_pos(&k, 0, 0.5, 0.0).unwrap().abs() < 1e-15);
        assert!(eigenfunction_pos(&k, 9, 0.5, 0.0).is_err());
    }

    #[test]
    fn neumann_weight_is_two_q_over_l_cos() {
        let k = kernel(1.0, 1.0, 0.0, 0.0, 4);
        let src = AxisSource {
            position: 0.5,
            strength: 3.0,
            release_time: 0.0,
        };
        let w = weight_pos(&k, 1, &src).unwrap();
        assert!((w + 2.0 * 3.0).abs() < 1e-13);
        let doubled = weight_pos(&k, 1, &AxisSource { strength: 6.0, ..src }).unwrap();
        assert!((doubled - 2.0 * w).abs() < 1e-13);
    }

    #[test]
    fn negative_weight_release_shift() {
        let k = kernel(1.0, 1e-3, 0.1e-3, 3e-3, 10);
        let src = AxisSource {
            position: 0.5,
            strength: 1.0,
            release_time: 0.0,
        };
        let w0 = weight_neg(&k, &src).unwrap().unwrap();
        let w1 = weight_neg(&k, &AxisSource { release_time: 2e-6, ..src }).unwrap().unwrap();
        let lam = k.spectrum().negative_root.unwrap();
        assert!((w1 / w0 - (1e-3 * lam * lam * 2e-6).exp()).abs() < 1e-12);
        let plain = kernel(1.0, 1.0, 0.3, 0.2, 3);
        assert!(plain.spectrum().negative_root.is_none());
        assert_eq!(weight_neg(&plain, &src).unwrap(), None);
    }

    #[test]
    fn before_and_at_release() {
        let k = kernel(1.0, 2.42e-5, 1e-7, 1e-1, 50);
        let w = ModeWeights::new(&k, &AxisSource { position: 0.5, strength: 1.0, release_time: 10.0 }).unwrap();
        assert_eq!(concentration_1d(&k, &w, 0.2, 5.0, Truncation::Adaptive { tol: 1e-12 }).unwrap(), 0.0);
        assert!(matches!(
            concentration_1d(&k, &w, 0.2, 10.0, Truncation::Adaptive { tol: 1e-12 }),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn reflecting_axis_relaxes_to_uniform() {
        let k = kernel(2.0, 1.0, 0.0, 0.0, 200);
        let w = ModeWeights::new(&k, &AxisSource { position: 0.3, strength: 5.0, release_time: 0.0 }).unwrap();
        for nu in [0.0, 0.7, 2.0] {
            let c = concentration_1d(&k, &w, nu, 50.0, Truncation::Adaptive { tol: 1e-12 }).unwrap();
            assert!((c - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn scaled_negative_norm_matches_direct_form() {
        for (lam, beta, l) in [(0.3f64, 0.1f64, 1.0f64), (2.0, 5.0, 1.0), (0.7, 0.0, 3.0)] {
            let direct = (2.0 * (2.0 * lam * l).sinh() * (lam * lam + beta * beta) + 4.0 * lam * beta * ((2.0 * lam * l).cosh() - 1.0)
                + 4.0 * l * lam * (lam * lam - beta * beta))
                / (8.0 * lam.powi(3));
            let got = norm_neg(lam, beta, l).value();
            assert!((got - direct).abs() < 1e-12 * direct, "{lam} {beta} {l}: {got} vs {direct}");
        }
    }

    #[test]
    fn positive_norm_matches_closed_form() {
        for (lam, beta, l) in [(PI, 0.0f64, 1.0f64), (1.3, 2.0, 1.0), (40.0, 0.5, 2.0), (1e-3, 3.0, 1.0)] {
            let u = lam * l;
            let direct = ((lam * lam - beta * beta) * (2.0 * u).sin() - 2.0 * lam * beta * (2.0 * u).cos()
                + 2.0 * lam * ((lam * lam + beta * beta) * l + beta))
                / (4.0 * lam.powi(3));
            let got = norm_pos(lam, beta, l);
            assert!((got - direct).abs() < 1e-9 * direct.abs().max(1.0), "{lam}: {got} vs {direct}");
        }
    }

    #[test]
    fn point_product_is_zero_before_release() {
        let axis = AxisSpec::new(1.0, 1e-3, 0.0, 0.0).unwrap();
        let room = Room { x: axis, y: axis, z: axis };
        let model = RoomModel::new(room, SeriesSettings { max_modes: 50, ..Default::default() }).unwrap();
        let src = PointSource { position: [0.5; 3], strength: 1.0, release_time: 1.0 };
        assert_eq!(concentration_point_3d(&model, &src, [0.2; 3], 0.5).unwrap(), 0.0);
        let wall = PointSource { position: [0.0, 0.5, 0.5], ..src };
        assert!(concentration_point_3d(&model, &wall, [0.2; 3], 2.0).is_err());
    }
}
