use rayon::prelude::*;

use super::config::{AdiCheck, FdmCheck, ScenarioConfig, ValidationSpec};
use super::run::{header, PointField};
use super::table::Table;
use crate::error::{Error, Result};
use crate::greens::{concentration_1d, AxisKernel, ModeWeights, PointSource, RoomModel};
use crate::oracle::{fdm_evolve_1d, fdm_evolve_3d, richardson, Grid1d, Grid3d, RobinClosure, StepConfig};

/// Finite-difference residuals of the series at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualRow {
    pub time: f64,
    pub peak: f64,
    /// `max |∂C/∂t - K ∂²C/∂ν²|` over interior points.
    pub pde: f64,
    /// `|∂C/∂ν - β₁C|` at `ν = 0`.
    pub bc_lo: f64,
    /// `|∂C/∂ν - β₂C|` at `ν = L`.
    pub bc_hi: f64,
}

impl ResidualRow {
    pub fn worst_relative(&self) -> f64 {
        self.pde.max(self.bc_lo).max(self.bc_hi) / self.peak
    }
}

/// Outcome of one oracle comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleRow {
    pub check: String,
    pub detail: String,
    /// Relative error; `NaN` when the oracle itself failed.
    pub error: f64,
    pub tolerance: f64,
}

impl OracleRow {
    pub fn passed(&self) -> bool {
        self.error <= self.tolerance
    }
}

pub struct ValidationReport {
    pub tables: Vec<Table>,
    pub passed: bool,
}

fn first_point_source(cfg: &ScenarioConfig) -> Result<PointSource> {
    cfg.point_sources()
        .first()
        .copied()
        .ok_or_else(|| Error::invalid("sources", "validation needs a point source"))
}

fn axis_setup(cfg: &ScenarioConfig, model: &RoomModel, spec: &ValidationSpec) -> Result<(usize, ModeWeights)> {
    let a = spec.axis.index();
    let src = first_point_source(cfg)?;
    let w = ModeWeights::new(&model.kernels[a], &src.axis_sources()[a])?;
    Ok((a, w))
}

const D2: [f64; 7] = [2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0];
const D1_EDGE: [f64; 7] = [-147.0, 360.0, -450.0, 400.0, -225.0, 72.0, -10.0];

/// Table-I style residuals of the 1-D series along the validation axis.
pub fn residuals(cfg: &ScenarioConfig) -> Result<Vec<ResidualRow>> {
    let spec = cfg
        .validation
        .as_ref()
        .ok_or_else(|| Error::invalid("validation", "this command needs a [validation] section"))?;
    let model = cfg.point_model()?;
    let (a, w) = axis_setup(cfg, &model, spec)?;
    let kernel = &model.kernels[a];
    let trunc = model.settings.truncation();
    let c = |x: f64, t: f64| concentration_1d(kernel, &w, x, t, trunc);
    let l = kernel.length();
    let k = kernel.axis().diffusivity;
    let (h, dt) = (spec.fd_step, spec.fd_dt);
    let (s_lo, s_hi) = RobinClosure::Series.slopes(kernel.axis());

    spec.times
        .iter()
        .map(|&t| {
            let xs: Vec<f64> = (0..spec.points).map(|i| l * i as f64 / (spec.points - 1) as f64).collect();
            let values = xs.par_iter().map(|&x| c(x, t)).collect::<Result<Vec<_>>>()?;
            let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let interior: Vec<f64> = xs.into_iter().filter(|&x| x >= 3.0 * h && x <= l - 3.0 * h).collect();
            let pde = interior
                .par_iter()
                .map(|&x| -> Result<f64> {
                    let mut cxx = 0.0;
                    for (j, coef) in D2.iter().enumerate() {
                        cxx += coef * c(x + (j as f64 - 3.0) * h, t)?;
                    }
                    cxx /= 180.0 * h * h;
                    let ct = (-c(x, t + 2.0 * dt)? + 8.0 * c(x, t + dt)? - 8.0 * c(x, t - dt)? + c(x, t - 2.0 * dt)?) / (12.0 * dt);
                    Ok((ct - k * cxx).abs())
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            let mut d_lo = 0.0;
            let mut d_hi = 0.0;
            for (j, coef) in D1_EDGE.iter().enumerate() {
                d_lo += coef * c(j as f64 * h, t)?;
                d_hi -= coef * c(l - j as f64 * h, t)?;
            }
            d_lo /= 60.0 * h;
            d_hi /= 60.0 * h;
            Ok(ResidualRow {
                time: t,
                peak,
                pde,
                bc_lo: (d_lo - s_lo * c(0.0, t)?).abs(),
                bc_hi: (d_hi - s_hi * c(l, t)?).abs(),
            })
        })
        .collect()
}

/// Series seeded Crank–Nicolson comparison along the validation axis.
pub fn fdm_check_1d(cfg: &ScenarioConfig, check: &FdmCheck) -> Result<OracleRow> {
    let spec = cfg
        .validation
        .as_ref()
        .ok_or_else(|| Error::invalid("validation", "this command needs a [validation] section"))?;
    let model = cfg.point_model()?;
    let (a, w) = axis_setup(cfg, &model, spec)?;
    let kernel: &AxisKernel = &model.kernels[a];
    let trunc = model.settings.truncation();
    let l = kernel.length();
    if check.nodes < 3 {
        return Err(Error::invalid("validation.fdm.nodes", "need at least 3 nodes"));
    }
    let xs: Vec<f64> = (0..check.nodes).map(|i| l * i as f64 / (check.nodes - 1) as f64).collect();
    let seed = xs.par_iter().map(|&x| concentration_1d(kernel, &w, x, check.seed_time, trunc)).collect::<Result<Vec<_>>>()?;
    let exact = xs.par_iter().map(|&x| concentration_1d(kernel, &w, x, check.end_time, trunc)).collect::<Result<Vec<_>>>()?;
    let detail = format!(
        "{} axis, {} nodes, dt <= {}, {} -> {} s, {:?} closure",
        spec.axis.label(),
        check.nodes,
        check.max_dt,
        check.seed_time,
        check.end_time,
        check.closure
    );
    let step = StepConfig::new(check.max_dt, check.closure);
    let error = match fdm_evolve_1d(kernel.axis(), &Grid1d { length: l, values: seed }, (check.seed_time, check.end_time), &step) {
        Ok(out) => {
            let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            out.values.iter().zip(&exact).map(|(f, e)| (f - e).abs()).fold(0.0, f64::max) / scale
        }
        Err(Error::Oracle(_)) => f64::NAN,
        Err(e) => return Err(e),
    };
    Ok(OracleRow {
        check: "fdm_1d".into(),
        detail,
        error,
        tolerance: check.tolerance,
    })
}

fn nodes_for(length: f64, spacing: f64, field: &str) -> Result<usize> {
    let r = length / spacing;
    if !(spacing > 0.0) || (r - r.round()).abs() > 1e-9 * r.max(1.0) {
        return Err(Error::invalid(field, format!("spacing {spacing} does not divide the length {length}")));
    }
    Ok(r.round() as usize + 1)
}

/// ADI solution at the probe for one grid refinement level.
fn adi_value(model: &RoomModel, src: &PointSource, check: &AdiCheck, level: u32) -> Result<f64> {
    let f = (1u32 << level) as f64;
    let lengths = model.room.lengths();
    let trunc = model.settings.truncation();
    let axes = src.axis_sources();
    let mut factors = Vec::with_capacity(3);
    for a in 0..3 {
        let n = nodes_for(lengths[a], check.spacing[a] / f, "validation.adi.spacing")?;
        let w = ModeWeights::new(&model.kernels[a], &axes[a])?;
        let h = lengths[a] / (n - 1) as f64;
        let vals = (0..n)
            .into_par_iter()
            .map(|i| concentration_1d(&model.kernels[a], &w, i as f64 * h, check.seed_time, trunc))
            .collect::<Result<Vec<_>>>()?;
        factors.push(vals);
    }
    let grid = Grid3d::separable(lengths, [&factors[0], &factors[1], &factors[2]]);
    grid.node_of(check.probe)?;
    let out = fdm_evolve_3d(&model.room, &grid, (check.seed_time, check.end_time), &StepConfig::new(check.max_dt / f, check.closure))?;
    out.at(check.probe)
}

/// Richardson-extrapolated 3-D ADI comparison at the probe point.
pub fn adi_check(cfg: &ScenarioConfig, check: &AdiCheck) -> Result<OracleRow> {
    let model = cfg.point_model()?;
    let src = first_point_source(cfg)?;
    let field = PointField::new(&model, &[src])?;
    let exact = field.eval(check.probe, check.end_time)?;
    let run = |level| match adi_value(&model, &src, check, level) {
        Ok(v) => Ok(v),
        Err(Error::Oracle(_)) => Ok(f64::NAN),
        Err(e) => Err(e),
    };
    let coarse = run(0)?;
    let fine = run(1)?;
    let extrapolated = richardson(coarse, fine);
    let rel = |v: f64| ((v - exact) / exact).abs();
    Ok(OracleRow {
        check: "adi_3d".into(),
        detail: format!(
            "probe {:?}, spacing {:?} and half, {} -> {} s; coarse {:.3e}, fine {:.3e}, extrapolated",
            check.probe,
            check.spacing,
            check.seed_time,
            check.end_time,
            rel(coarse),
            rel(fine)
        ),
        error: rel(extrapolated),
        tolerance: check.tolerance,
    })
}

/// Residual and oracle tables for the `[validation]` section.
pub fn validate_tables(cfg: &ScenarioConfig) -> Result<ValidationReport> {
    let spec = cfg
        .validation
        .as_ref()
        .ok_or_else(|| Error::invalid("validation", "this command needs a [validation] section"))?;
    let model = cfg.point_model()?;
    let head = header(cfg, "validate", &model)?;
    let mut passed = true;

    let mut res = Table::new(
        "validate_residuals",
        &[
            "axis",
            "time",
            "time_min",
            "peak",
            "pde_residual",
            "pde_relative",
            "bc_lo_residual",
            "bc_lo_relative",
            "bc_hi_residual",
            "bc_hi_relative",
            "pass",
        ],
    );
    res.header = head.clone();
    for r in residuals(cfg)? {
        let ok = r.worst_relative() < spec.tolerance;
        passed &= ok;
        res.push(vec![
            spec.axis.label().into(),
            r.time.into(),
            (r.time / 60.0).into(),
            r.peak.into(),
            r.pde.into(),
            (r.pde / r.peak).into(),
            r.bc_lo.into(),
            (r.bc_lo / r.peak).into(),
            r.bc_hi.into(),
            (r.bc_hi / r.peak).into(),
            ok.into(),
        ]);
    }

    let mut oracle = Table::new("validate_oracle", &["check", "detail", "relative_error", "tolerance", "pass"]);
    oracle.header = head;
    let mut rows = Vec::new();
    if let Some(f) = &spec.fdm {
        rows.push(fdm_check_1d(cfg, f)?);
    }
    if let Some(a) = &spec.adi {
        rows.push(adi_check(cfg, a)?);
    }
    for r in rows {
        passed &= r.passed();
        oracle.push(vec![r.check.as_str().into(), r.detail.as_str().into(), r.error.into(), r.tolerance.into(), r.passed().into()]);
    }
    Ok(ValidationReport {
        tables: vec![res, oracle],
        passed,
    })
}
