//! Continuous planar exhalation sources.
//!
//! A person exhaling for `[t₀, t_e]` is modelled as a uniform emitter on a
//! disc of radius `r_c` in the plane `x = x_p`. The field is the point-source
//! kernel integrated over the disc and over emission time:
//!
//! ```text
//! C(x,y,z,t) = S ∫dτ ∫dz₀ G_x(x; x_p) G_z(z; z₀) ∫_{y₁(z₀)}^{y₂(z₀)} G_y(y; y₀) dy₀
//! ```
//!
//! The `y₀` integral is closed-form. The chord parameter `z₀ = z_p + r sin θ`
//! is integrated with composite Gauss–Legendre and the emission time with
//! adaptive Gauss–Kronrod in `u = √(t-τ)`, which removes the `1/√(t-τ)`
//! endpoint singularity while the source is still active.
//!
//! Square surrogates replace the disc by an axis-aligned square, making both
//! transverse integrals closed-form.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::greens::{probe_mode, AxisKernel, Mode, ModeTable, Probe, RoomModel, Truncation};
use crate::quadrature::{composite_gauss_legendre, integrate_gk, QuadratureConfig};

/// Uniform disc emitter in the plane `x = plane_x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExhalationSource {
    pub plane_x: f64,
    /// `(y_p, z_p)`
    pub center: [f64; 2],
    pub radius: f64,
    /// Emission per unit area and time; `1` gives fields normalised by `Q`.
    #[serde(default = "unit")]
    pub strength_rate: f64,
    pub start: f64,
    pub end: f64,
}

fn unit() -> f64 {
    1.0
}

impl ExhalationSource {
    pub fn validate(&self, model: &RoomModel) -> Result<()> {
        let [lx, ly, lz] = model.room.lengths();
        let [yp, zp] = self.center;
        if !(self.plane_x > 0.0 && self.plane_x < lx) {
            return Err(Error::invalid("source.plane_x", format!("{} must lie strictly inside (0, {lx})", self.plane_x)));
        }
        if !(self.radius.is_finite() && self.radius >= 0.0) {
            return Err(Error::invalid("source.radius", "must be finite and >= 0"));
        }
        let room = yp.min(ly - yp).min(zp).min(lz - zp);
        if !(room.is_finite() && self.radius <= room) {
            return Err(Error::invalid(
                "source.radius",
                format!("disc of radius {} around ({yp}, {zp}) leaves the y-z cross-section", self.radius),
            ));
        }
        if !(self.strength_rate.is_finite() && self.strength_rate >= 0.0) {
            return Err(Error::invalid("source.strength_rate", "must be finite and >= 0"));
        }
        if !(self.start.is_finite() && self.end.is_finite() && self.end > self.start) {
            return Err(Error::invalid("source.end", "emission must end after it starts"));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }
}

/// Square stand-ins for the disc.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanarSurrogate {
    /// Inscribed square, side `√2·r`.
    LowerSquare,
    /// Square of equal area, side `√π·r`.
    EqualAreaSquare,
    /// Circumscribed square, side `2·r`.
    UpperSquare,
}

impl PlanarSurrogate {
    pub const ALL: [PlanarSurrogate; 3] = [Self::LowerSquare, Self::EqualAreaSquare, Self::UpperSquare];

    pub fn side(self, radius: f64) -> f64 {
        match self {
            Self::LowerSquare => 2f64.sqrt() * radius,
            Self::EqualAreaSquare => PI.sqrt() * radius,
            Self::UpperSquare => 2.0 * radius,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::LowerSquare => "lower",
            Self::EqualAreaSquare => "equal",
            Self::UpperSquare => "upper",
        }
    }
}

/// Shape of the emitting region in the source plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Footprint {
    Circle,
    Square(PlanarSurrogate),
}

/// `ℓ̂_n(τ) = e^{Kλ²τ} ∫_{y₁}^{y₂} V_n / ‖V_n‖² dy₀` for unit strength.
pub fn lhat_pos(kernel: &AxisKernel, n: usize, tau: f64, bounds: (f64, f64)) -> Result<f64> {
    Probe::Span(bounds.0, bounds.1).check(kernel.length(), "bounds")?;
    let lam = *kernel
        .spectrum()
        .positive_roots
        .get(n)
        .ok_or_else(|| Error::invalid("n", format!("mode {n} not in spectrum")))?;
    let seg = probe_mode(Mode::Positive(lam), kernel.beta(), Probe::Span(bounds.0, bounds.1));
    Ok(seg.mantissa / kernel.positive_norm(n) * (-kernel.positive_rate(n) * tau).exp())
}

/// Negative-mode analogue of [`lhat_pos`]; absent without a negative mode.
pub fn lhat_neg(kernel: &AxisKernel, tau: f64, bounds: (f64, f64)) -> Result<Option<f64>> {
    Probe::Span(bounds.0, bounds.1).check(kernel.length(), "bounds")?;
    let (Some(lam), Some(norm), Some(rate)) = (kernel.spectrum().negative_root, kernel.negative_norm(), kernel.negative_rate()) else {
        return Ok(None);
    };
    let seg = probe_mode(Mode::Negative(lam), kernel.beta(), Probe::Span(bounds.0, bounds.1));
    Ok(Some(seg.div(norm).times_exp(-rate * tau)))
}

/// Transverse structure of a planar source, ready for time integration.
///
/// For each observation probe triple this holds one [`ModeTable`] per axis.
/// The x table has a single row; the y and z tables have one row per disc
/// chord (or one row for a square), combined with `weights`.
pub(crate) struct PlaneKernel<'a> {
    model: &'a RoomModel,
    x: ModeTable,
    y: ModeTable,
    z: ModeTable,
    weights: Vec<f64>,
    truncation: Truncation,
}

impl<'a> PlaneKernel<'a> {
    pub(crate) fn new(
        model: &'a RoomModel,
        source: &ExhalationSource,
        footprint: Footprint,
        obs: [Probe; 3],
        quad: &QuadratureConfig,
    ) -> Self {
        let [k_x, k_y, k_z] = &model.kernels;
        let [yp, zp] = source.center;
        let r = source.radius;
        let x = k_x.table(&[(obs[0], Probe::Point(source.plane_x))]);
        let (y_rows, z_rows, weights): (Vec<_>, Vec<_>, Vec<_>) = match footprint {
            Footprint::Square(s) => {
                let h = 0.5 * s.side(r);
                (
                    vec![(obs[1], Probe::Span(yp - h, yp + h))],
                    vec![(obs[2], Probe::Span(zp - h, zp + h))],
                    vec![1.0],
                )
            }
            Footprint::Circle => {
                let nodes = composite_gauss_legendre(-FRAC_PI_2, FRAC_PI_2, quad.disc_nodes, quad.disc_panels);
                let mut ys = Vec::with_capacity(nodes.len());
                let mut zs = Vec::with_capacity(nodes.len());
                let mut ws = Vec::with_capacity(nodes.len());
                for (theta, w) in nodes {
                    let (s, c) = theta.sin_cos();
                    let half = r * c;
                    ys.push((obs[1], Probe::Span(yp - half, yp + half)));
                    zs.push((obs[2], Probe::Point(zp + r * s)));
                    ws.push(w * r * c);
                }
                (ys, zs, ws)
            }
        };
        Self {
            model,
            x,
            y: k_y.table(&y_rows),
            z: k_z.table(&z_rows),
            weights,
            truncation: model.settings.truncation(),
        }
    }

    /// Source-plane integral of the kernel product at elapsed time `s`.
    pub(crate) fn eval(&self, s: f64) -> f64 {
        let [k_x, k_y, k_z] = &self.model.kernels;
        let mut gx = Vec::with_capacity(1);
        self.x.eval(k_x, s, self.truncation, &mut gx);
        if gx[0] == 0.0 {
            return 0.0;
        }
        let mut gy = Vec::with_capacity(self.weights.len());
        let mut gz = Vec::with_capacity(self.weights.len());
        self.y.eval(k_y, s, self.truncation, &mut gy);
        self.z.eval(k_z, s, self.truncation, &mut gz);
        let plane: f64 = self.weights.iter().zip(gy.iter().zip(&gz)).map(|(w, (a, b))| w * a * b).sum();
        gx[0] * plane
    }

    /// `∫ eval(s) ds` over `[s_lo, s_hi]`, integrated in `u = √s`.
    pub(crate) fn integrate_elapsed(&self, s_lo: f64, s_hi: f64, quad: &QuadratureConfig) -> Result<f64> {
        if s_hi <= s_lo {
            return Ok(0.0);
        }
        let (u_lo, u_hi) = (s_lo.max(0.0).sqrt(), s_hi.sqrt());
        let est = integrate_gk(
            |u| {
                if u <= 0.0 {
                    0.0
                } else {
                    2.0 * u * self.eval(u * u)
                }
            },
            u_lo,
            u_hi,
            quad.abs_tol,
            quad.rel_tol,
            quad.max_subdivisions,
        )?;
        Ok(est.value)
    }
}

fn planar(
    model: &RoomModel,
    source: &ExhalationSource,
    footprint: Footprint,
    point: [f64; 3],
    t: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    quad.validate()?;
    source.validate(model)?;
    model.room.check_point(point, "point")?;
    if !t.is_finite() {
        return Err(Error::invalid("t", "must be finite"));
    }
    if t <= source.start || source.radius == 0.0 || source.strength_rate == 0.0 {
        return Ok(0.0);
    }
    let obs = [Probe::Point(point[0]), Probe::Point(point[1]), Probe::Point(point[2])];
    let kernel = PlaneKernel::new(model, source, footprint, obs, quad);
    let s_lo = (t - source.end).max(0.0);
    let s_hi = t - source.start;
    Ok(source.strength_rate * kernel.integrate_elapsed(s_lo, s_hi, quad)?)
}

/// Field of the disc emitter at `point` and time `t`.
pub fn concentration_circular(
    model: &RoomModel,
    source: &ExhalationSource,
    point: [f64; 3],
    t: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    planar(model, source, Footprint::Circle, point, t, quad)
}

/// Field of a square surrogate of the disc at `point` and time `t`.
pub fn concentration_square(
    model: &RoomModel,
    source: &ExhalationSource,
    surrogate: PlanarSurrogate,
    point: [f64; 3],
    t: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    planar(model, source, Footprint::Square(surrogate), point, t, quad)
}

/// Dispatch on a footprint.
pub fn concentration_planar(
    model: &RoomModel,
    source: &ExhalationSource,
    footprint: Footprint,
    point: [f64; 3],
    t: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    planar(model, source, footprint, point, t, quad)
}
