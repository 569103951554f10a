//! Air-sampler integration and miss-detection probability.
//!
//! A cuboid sampler centred at `(x_d, y_d, z_d)` with edges `(a_x, a_y, a_z)`
//! collects air over the window `[t - T_s, t]`. The collected amount is the
//! space-time integral of the field over the cuboid and the window. A
//! biosensor then compares `ηγ C_samp + noise` against the maximum-likelihood
//! threshold `ηγ C_samp / 2`, giving
//!
//! ```text
//! P_md = Q(ηγ C_samp / √(8σ²)) = Q(√(Γ C_samp² / Q_p)),   Γ = Q_p (ηγ)² / (8σ²).
//! ```

use serde::{Deserialize, Serialize};
use libm::erfc;
use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::greens::{probe_mode, AxisKernel, Mode, Probe, RoomModel};
use crate::quadrature::{integrate_gk, QuadratureConfig};
use crate::source::{ExhalationSource, Footprint, PlaneKernel};

/// Cuboid air sampler and its sampling window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    pub center: [f64; 3],
    pub edges: [f64; 3],
    /// Window length `T_s` in seconds.
    pub sampling_time: f64,
    /// Window end `t` in seconds.
    pub sample_end: f64,
}

impl SamplerSpec {
    pub fn volume(&self) -> f64 {
        self.edges.iter().product()
    }

    /// The `[lo, hi]` slice of the cuboid along axis `i`.
    pub fn slice(&self, i: usize) -> (f64, f64) {
        let h = 0.5 * self.edges[i];
        (self.center[i] - h, self.center[i] + h)
    }

    pub fn validate(&self, model: &RoomModel) -> Result<()> {
        let lengths = model.room.lengths();
        for i in 0..3 {
            let axis = ["x", "y", "z"][i];
            if !(self.edges[i].is_finite() && self.edges[i] > 0.0) {
                return Err(Error::invalid(format!("sampler.edges.{axis}"), "must be finite and > 0"));
            }
            let (lo, hi) = self.slice(i);
            let tol = 1e-12 * lengths[i];
            if !(lo >= -tol && hi <= lengths[i] + tol) {
                return Err(Error::invalid(
                    format!("sampler.center.{axis}"),
                    format!("cuboid [{lo}, {hi}] leaves [0, {}]", lengths[i]),
                ));
            }
        }
        if !(self.sampling_time.is_finite() && self.sampling_time >= 0.0) {
            return Err(Error::invalid("sampler.sampling_time", "must be finite and >= 0"));
        }
        if !self.sample_end.is_finite() {
            return Err(Error::invalid("sampler.sample_end", "must be finite"));
        }
        Ok(())
    }

    fn probes(&self, model: &RoomModel) -> [Probe; 3] {
        let lengths = model.room.lengths();
        std::array::from_fn(|i| {
            let (lo, hi) = self.slice(i);
            Probe::Span(lo.max(0.0), hi.min(lengths[i]))
        })
    }
}

/// Biosensor parameters. Either the physical triple `(η, γ, σ²)` or the
/// lumped ratio `Γ` must be present; when both are, they must agree.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub sigma2: Option<f64>,
    /// `Γ` as a linear ratio.
    pub gamma_ratio: Option<f64>,
    /// `Γ` in decibels.
    pub gamma_ratio_db: Option<f64>,
}

impl DetectorSpec {
    pub fn from_db(db: f64) -> Self {
        Self {
            gamma_ratio_db: Some(db),
            ..Self::default()
        }
    }

    pub fn physical(eta: f64, gamma: f64, sigma2: f64) -> Self {
        Self {
            eta: Some(eta),
            gamma: Some(gamma),
            sigma2: Some(sigma2),
            ..Self::default()
        }
    }

    fn physical_triple(&self) -> Result<Option<(f64, f64, f64)>> {
        match (self.eta, self.gamma, self.sigma2) {
            (None, None, None) => Ok(None),
            (Some(eta), Some(gamma), Some(sigma2)) => {
                if !(eta > 0.0 && eta <= 1.0) {
                    return Err(Error::invalid("detector.eta", "must lie in (0, 1]"));
                }
                if !(gamma > 0.0 && gamma <= 1.0) {
                    return Err(Error::invalid("detector.gamma", "must lie in (0, 1]"));
                }
                if !(sigma2.is_finite() && sigma2 > 0.0) {
                    return Err(Error::invalid("detector.sigma2", "must be finite and > 0"));
                }
                Ok(Some((eta, gamma, sigma2)))
            }
            _ => Err(Error::invalid("detector", "eta, gamma and sigma2 must be given together")),
        }
    }

    fn lumped_ratio(&self) -> Result<Option<f64>> {
        let r = match (self.gamma_ratio, self.gamma_ratio_db) {
            (None, None) => return Ok(None),
            (Some(r), None) => r,
            (None, Some(db)) => 10f64.powf(db / 10.0),
            (Some(_), Some(_)) => {
                return Err(Error::invalid("detector", "give gamma_ratio or gamma_ratio_db, not both"));
            }
        };
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::invalid("detector.gamma_ratio", "must be finite and >= 0"));
        }
        Ok(Some(r))
    }

    /// Linear `Γ` for a source of strength `q_p`, checking agreement of the
    /// two parameterisations when both are given.
    pub fn gamma_ratio_linear(&self, q_p: f64) -> Result<f64> {
        if !(q_p.is_finite() && q_p > 0.0) {
            return Err(Error::invalid("q_p", "must be finite and > 0"));
        }
        let lumped = self.lumped_ratio()?;
        let derived = self
            .physical_triple()?
            .map(|(eta, gamma, sigma2)| q_p * (eta * gamma).powi(2) / (8.0 * sigma2));
        match (lumped, derived) {
            (Some(a), Some(b)) => {
                if (a - b).abs() > 1e-9 * a.abs().max(b.abs()) {
                    return Err(Error::invalid(
                        "detector",
                        format!("gamma_ratio {a} disagrees with Q_p(ηγ)²/(8σ²) = {b}"),
                    ));
                }
                Ok(b)
            }
            (Some(a), None) | (None, Some(a)) => Ok(a),
            (None, None) => Err(Error::invalid("detector", "needs either (eta, gamma, sigma2) or a gamma ratio")),
        }
    }
}

/// Standard normal right tail `Q(x) = ½ erfc(x/√2)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `ln Q(x)`, finite far beyond the point where `Q(x)` underflows.
///
/// Above `x = 20` the asymptotic expansion
/// `Q(x) = φ(x)/x · (1 - 1/x² + 3/x⁴ - 15/x⁶ + 105/x⁸ - 945/x¹⁰ + …)`
/// is accurate to about `1e-11`.
pub fn ln_q_function(x: f64) -> f64 {
    if x < 20.0 {
        return q_function(x).ln();
    }
    let r = 1.0 / (x * x);
    let series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r * (1.0 - 9.0 * r))));
    -0.5 * x * x - x.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + series.ln()
}

/// Maximum-likelihood threshold `C_th = ηγ C_samp / 2` for equally likely
/// hypotheses.
pub fn ml_threshold(detector: &DetectorSpec, c_samp: f64) -> Result<f64> {
    if !(c_samp.is_finite() && c_samp >= 0.0) {
        return Err(Error::invalid("c_samp", "must be finite and >= 0"));
    }
    let (eta, gamma, _) = detector
        .physical_triple()?
        .ok_or_else(|| Error::invalid("detector", "the threshold needs eta and gamma"))?;
    Ok(eta * gamma * c_samp / 2.0)
}

/// Argument of `Q` in the miss-detection probability.
fn pmd_argument(detector: &DetectorSpec, c_samp: f64, q_p: f64) -> Result<f64> {
    if !(c_samp.is_finite() && c_samp >= 0.0) {
        return Err(Error::invalid("c_samp", "must be finite and >= 0"));
    }
    let ratio = detector.gamma_ratio_linear(q_p)?;
    Ok(match detector.physical_triple()? {
        Some((eta, gamma, sigma2)) => eta * gamma * c_samp / (8.0 * sigma2).sqrt(),
        None => (ratio * c_samp * c_samp / q_p).sqrt(),
    })
}

/// Miss-detection probability for a collected amount `c_samp` from a source
/// of strength `q_p`.
pub fn miss_detection_probability(detector: &DetectorSpec, c_samp: f64, q_p: f64) -> Result<f64> {
    Ok(q_function(pmd_argument(detector, c_samp, q_p)?))
}

/// `log₁₀ P_md`, which stays finite when `P_md` itself underflows.
pub fn log10_miss_detection_probability(detector: &DetectorSpec, c_samp: f64, q_p: f64) -> Result<f64> {
    Ok(ln_q_function(pmd_argument(detector, c_samp, q_p)?) / std::f64::consts::LN_10)
}

fn slice_probe(kernel: &AxisKernel, center: f64, edge: f64) -> Result<Probe> {
    let p = Probe::Span(center - 0.5 * edge, center + 0.5 * edge);
    p.check(kernel.length(), "slice")?;
    Ok(p)
}

/// `Ψ_n(t) = e^{-Kλ²t} ∫ V_n` over the slice `[ν_d - a/2, ν_d + a/2]`.
pub fn psi_pos(kernel: &AxisKernel, n: usize, center: f64, edge: f64, t: f64) -> Result<f64> {
    let p = slice_probe(kernel, center, edge)?;
    let lam = *kernel
        .spectrum()
        .positive_roots
        .get(n)
        .ok_or_else(|| Error::invalid("n", format!("mode {n} not in spectrum")))?;
    Ok(probe_mode(Mode::Positive(lam), kernel.beta(), p).mantissa * (kernel.positive_rate(n) * t).exp())
}

/// Negative-mode analogue of [`psi_pos`]; absent without a negative mode.
pub fn psi_neg(kernel: &AxisKernel, center: f64, edge: f64, t: f64) -> Result<Option<f64>> {
    let p = slice_probe(kernel, center, edge)?;
    let (Some(lam), Some(rate)) = (kernel.spectrum().negative_root, kernel.negative_rate()) else {
        return Ok(None);
    };
    Ok(Some(probe_mode(Mode::Negative(lam), kernel.beta(), p).times_exp(rate * t)))
}

/// Amount collected by `sampler` from a planar source: the field integrated
/// over the cuboid and the sampling window.
pub fn sampled_concentration(
    model: &RoomModel,
    source: &ExhalationSource,
    footprint: Footprint,
    sampler: &SamplerSpec,
    quad: &QuadratureConfig,
) -> Result<f64> {
    quad.validate()?;
    source.validate(model)?;
    sampler.validate(model)?;
    let t = sampler.sample_end;
    let w_lo = (t - sampler.sampling_time).max(source.start);
    if t <= w_lo || source.radius == 0.0 || source.strength_rate == 0.0 {
        return Ok(0.0);
    }
    let kernel = PlaneKernel::new(model, source, footprint, sampler.probes(model), quad);
    let inner_quad = QuadratureConfig {
        abs_tol: 0.1 * quad.abs_tol / sampler.sampling_time.max(1.0),
        ..*quad
    };
    let failure = RefCell::new(None);
    let collected = |tp: f64| -> f64 {
        let s_lo = (tp - source.end).max(0.0);
        let s_hi = tp - source.start;
        match kernel.integrate_elapsed(s_lo, s_hi, &inner_quad) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    // The integrand has a kink where emission stops.
    let mut breaks = vec![w_lo];
    if source.end > w_lo && source.end < t {
        breaks.push(source.end);
    }
    breaks.push(t);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let est = integrate_gk(&collected, w[0], w[1], quad.abs_tol, quad.rel_tol, quad.max_subdivisions);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        total += est?.value;
    }
    Ok(source.strength_rate * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenspectrum::AxisSpec;
    use crate::greens::SeriesSettings;

    #[test]
    fn q_function_values() {
        assert_eq!(q_function(0.0), 0.5);
        assert!(q_function(40.0) < 1e-300);
        let q1 = q_function(1.0);
        assert!((q1 - 0.158_655_253_931_457_05).abs() < 1e-15, "{q1:e}");
    }

    #[test]
    fn log_q_is_continuous_and_matches_direct_values() {
        for x in [-3.0, 0.0, 1.0, 5.0, 12.0, 19.5, 20.5, 25.0, 35.0] {
            let direct = q_function(x).ln();
            assert!((ln_q_function(x) - direct).abs() < 1e-10 * direct.abs().max(1.0), "x={x}");
        }
        let direct = q_function(20.0).ln();
        assert!((ln_q_function(20.0) - direct).abs() < 1e-10 * direct.abs());
        assert!(ln_q_function(1e3).is_finite() && ln_q_function(1e3) < ln_q_function(999.0));
    }

    #[test]
    fn threshold_examples() {
        let d = DetectorSpec::physical(1.0, 1.0, 0.3);
        assert_eq!(ml_threshold(&d, 0.0).unwrap(), 0.0);
        assert_eq!(ml_threshold(&d, 2.0).unwrap(), 1.0);
        assert!(ml_threshold(&DetectorSpec::from_db(20.0), 1.0).is_err());
    }

    #[test]
    fn pmd_limits() {
        let d = DetectorSpec::from_db(24.0);
        assert_eq!(miss_detection_probability(&d, 0.0, 1.0).unwrap(), 0.5);
        assert!(miss_detection_probability(&d, 1e6, 1.0).unwrap() < 1e-300);
    }

    #[test]
    fn dual_parameterisations_agree() {
        let q_p = 3.5;
        let phys = DetectorSpec::physical(0.6, 0.8, 0.02);
        let ratio = phys.gamma_ratio_linear(q_p).unwrap();
        let lumped = DetectorSpec {
            gamma_ratio: Some(ratio),
            ..DetectorSpec::default()
        };
        for c in [0.01, 0.1, 0.4, 1.0] {
            let a = miss_detection_probability(&phys, c, q_p).unwrap();
            let b = miss_detection_probability(&lumped, c, q_p).unwrap();
            assert!((a - b).abs() <= 1e-12 * a, "{a} vs {b}");
        }
        let both = DetectorSpec {
            gamma_ratio: Some(ratio * 1.5),
            ..phys
        };
        assert!(miss_detection_probability(&both, 0.1, q_p).is_err());
    }

    #[test]
    fn psi_examples() {
        let settings = SeriesSettings {
            max_modes: 3,
            ..SeriesSettings::default()
        };
        let k = AxisKernel::solve(AxisSpec::new(2.0, 1e-3, 0.0, 0.0).unwrap(), &settings).unwrap();
        assert_eq!(psi_pos(&k, 0, 0.7, 0.0, 1.0).unwrap(), 0.0);
        assert!(psi_pos(&k, 1, 1.0, 2.0, 0.0).unwrap().abs() < 1e-15);
        assert_eq!(psi_neg(&k, 1.0, 0.5, 0.0).unwrap(), None);
        let k = AxisKernel::solve(AxisSpec::new(1.0, 1e-3, 1e-4, 2e-3).unwrap(), &settings).unwrap();
        assert_eq!(psi_neg(&k, 0.4, 0.0, 3.0).unwrap(), Some(0.0));
    }
}
