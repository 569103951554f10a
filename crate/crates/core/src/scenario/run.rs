use rayon::prelude::*;

use super::config::{ScenarioConfig, SurrogateChoice};
use super::table::{Cell, Table};
use crate::detection::{
    log10_miss_detection_probability, miss_detection_probability, sampled_concentration, DetectorSpec, SamplerSpec,
};
use crate::error::{Error, Result};
use crate::greens::{concentration_1d, AxisKernel, ModeWeights, PointSource, RoomModel, SeriesSettings};
use crate::source::concentration_planar;

/// Comment lines identifying the configuration and numerical settings.
pub fn header(cfg: &ScenarioConfig, command: &str, model: &RoomModel) -> Result<Vec<String>> {
    let s: &SeriesSettings = &model.settings;
    let q = &cfg.quadrature;
    let mut lines = vec![
        format!("aerodiff {command}"),
        format!("scenario: {}", cfg.name),
        format!("config_sha256: {}", cfg.hash()?),
        format!(
            "series: max_modes={} root_tol={:e} zero_mode_tol={:e} tail_tol={:e} negative_mode={:?}",
            s.max_modes, s.root_tol, s.zero_mode_tol, s.tail_tol, s.negative_mode
        ),
        format!(
            "quadrature: abs_tol={:e} rel_tol={:e} max_subdivisions={} disc_nodes={} disc_panels={}",
            q.abs_tol, q.rel_tol, q.max_subdivisions, q.disc_nodes, q.disc_panels
        ),
    ];
    let modes: Vec<String> = ["x", "y", "z"]
        .iter()
        .zip(&model.kernels)
        .map(|(name, k)| describe_modes(name, k))
        .collect();
    lines.push(format!("modes: {}", modes.join("; ")));
    Ok(lines)
}

fn describe_modes(name: &str, k: &AxisKernel) -> String {
    let sp = k.spectrum();
    format!(
        "{name} positive={} negative={} zero={}",
        k.positive_count(),
        sp.negative_root.map_or("none".to_string(), |l| format!("{l:e}")),
        sp.zero_mode
    )
}

/// Eigenvalues, norms and (for the first point source) weights per axis.
pub fn spectrum_table(cfg: &ScenarioConfig) -> Result<Table> {
    let model = cfg.point_model()?;
    let mut t = Table::new(
        "spectrum",
        &["axis", "kind", "index", "lambda", "rate", "norm_mantissa", "norm_log", "weight_mantissa", "weight_log"],
    );
    t.header = header(cfg, "spectrum", &model)?;
    let source = cfg.point_sources().first().copied();
    for (a, k) in model.kernels.iter().enumerate() {
        let axis = ["x", "y", "z"][a];
        let weights = match source {
            Some(src) => Some(ModeWeights::new(k, &src.axis_sources()[a])?),
            None => None,
        };
        if k.spectrum().zero_mode {
            let norm = k.zero_norm().unwrap_or(f64::NAN);
            let w = weights.as_ref().and_then(|w| w.zero).unwrap_or(f64::NAN);
            t.push(vec![axis.into(), "zero".into(), 0usize.into(), 0.0.into(), 0.0.into(), norm.into(), 0.0.into(), w.into(), 0.0.into()]);
        }
        if let (Some(lam), Some(norm), Some(rate)) = (k.spectrum().negative_root, k.negative_norm(), k.negative_rate()) {
            let w = weights.as_ref().and_then(|w| w.negative);
            t.push(vec![
                axis.into(),
                "negative".into(),
                0usize.into(),
                lam.into(),
                rate.into(),
                norm.mantissa.into(),
                norm.log_scale.into(),
                w.map_or(f64::NAN, |w| w.mantissa).into(),
                w.map_or(f64::NAN, |w| w.log_scale).into(),
            ]);
        }
        for (n, &lam) in k.spectrum().positive_roots.iter().enumerate() {
            let w = weights.as_ref().map_or(f64::NAN, |w| w.positive[n]);
            t.push(vec![
                axis.into(),
                "positive".into(),
                (n + 1).into(),
                lam.into(),
                k.positive_rate(n).into(),
                k.positive_norm(n).into(),
                0.0.into(),
                w.into(),
                0.0.into(),
            ]);
        }
    }
    Ok(t)
}

/// Evaluation points of the grid in output order, with a set label.
fn grid_points(cfg: &ScenarioConfig) -> Result<Vec<(String, [f64; 3])>> {
    let g = cfg
        .grid
        .as_ref()
        .ok_or_else(|| Error::invalid("grid", "this command needs a [grid] section"))?;
    let mut pts: Vec<(String, [f64; 3])> = g.points.iter().enumerate().map(|(i, p)| (format!("point{i}"), *p)).collect();
    for (i, line) in g.lines.iter().enumerate() {
        let label = format!("line{i}_{}", line.axis.label());
        pts.extend(line.positions(&cfg.room).into_iter().map(|p| (label.clone(), p)));
    }
    Ok(pts)
}

/// Precomputed weights for a set of point sources.
pub struct PointField<'a> {
    model: &'a RoomModel,
    weights: Vec<[ModeWeights; 3]>,
    strength: f64,
}

impl<'a> PointField<'a> {
    pub fn new(model: &'a RoomModel, sources: &[PointSource]) -> Result<Self> {
        let mut weights = Vec::with_capacity(sources.len());
        for s in sources {
            s.validate(&model.room)?;
            let axes = s.axis_sources();
            weights.push([
                ModeWeights::new(&model.kernels[0], &axes[0])?,
                ModeWeights::new(&model.kernels[1], &axes[1])?,
                ModeWeights::new(&model.kernels[2], &axes[2])?,
            ]);
        }
        Ok(Self {
            model,
            weights,
            strength: sources.iter().map(|s| s.strength).sum(),
        })
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn eval(&self, point: [f64; 3], t: f64) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..self.weights.len() {
            total += self.factors(i, point, t)?.iter().product::<f64>();
        }
        Ok(total)
    }

    /// Per-axis factors `C_x, C_y, C_z` of source `i`.
    pub fn factors(&self, i: usize, point: [f64; 3], t: f64) -> Result<[f64; 3]> {
        self.model.room.check_point(point, "point")?;
        let trunc = self.model.settings.truncation();
        let w = &self.weights[i];
        let mut out = [0.0; 3];
        for a in 0..3 {
            out[a] = concentration_1d(&self.model.kernels[a], &w[a], point[a], t, trunc)?;
        }
        Ok(out)
    }
}

/// Point-source field on the grid.
pub fn point_table(cfg: &ScenarioConfig) -> Result<Table> {
    let sources = cfg.point_sources();
    if sources.is_empty() {
        return Err(Error::invalid("sources", "no point source defined"));
    }
    let model = cfg.point_model()?;
    let field = PointField::new(&model, &sources)?;
    let times = &cfg.grid.as_ref().map(|g| g.times.clone()).unwrap_or_default();
    let pts = grid_points(cfg)?;
    let tasks: Vec<(f64, &(String, [f64; 3]))> = times.iter().flat_map(|&t| pts.iter().map(move |p| (t, p))).collect();
    let single = sources.len() == 1;
    let values = tasks
        .par_iter()
        .map(|(t, (_, p))| -> Result<(f64, [f64; 3])> {
            if single {
                let f = field.factors(0, *p, *t)?;
                Ok((f.iter().product(), f))
            } else {
                Ok((field.eval(*p, *t)?, [f64::NAN; 3]))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new("point", &["time", "set", "x", "y", "z", "concentration", "c_over_q", "c_x", "c_y", "c_z"]);
    table.header = header(cfg, "point", &model)?;
    table.header.push("c_x, c_y, c_z: per-axis factors with the strength carried on x (single-source runs only)".into());
    for ((t, (label, p)), (c, f)) in tasks.iter().zip(values) {
        table.push(vec![
            (*t).into(),
            label.as_str().into(),
            p[0].into(),
            p[1].into(),
            p[2].into(),
            c.into(),
            (c / field.strength()).into(),
            f[0].into(),
            f[1].into(),
            f[2].into(),
        ]);
    }
    Ok(table)
}

/// Planar-source field on the grid for one footprint.
pub fn breath_table(cfg: &ScenarioConfig, surrogate: SurrogateChoice) -> Result<Table> {
    let sources = cfg.exhalations();
    if sources.is_empty() {
        return Err(Error::invalid("sources", "no exhalation source defined"));
    }
    let model = cfg.source_model()?;
    for s in &sources {
        s.validate(&model)?;
    }
    let grid = cfg.grid.as_ref().ok_or_else(|| Error::invalid("grid", "this command needs a [grid] section"))?;
    let pts = grid_points(cfg)?;
    let tasks: Vec<(f64, &(String, [f64; 3]))> = grid.times.iter().flat_map(|&t| pts.iter().map(move |p| (t, p))).collect();
    let footprint = surrogate.footprint();
    let values = tasks
        .par_iter()
        .map(|(t, (_, p))| {
            sources
                .iter()
                .map(|s| concentration_planar(&model, s, footprint, *p, *t, &cfg.quadrature))
                .sum::<Result<f64>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let rate: f64 = sources.iter().map(|s| s.strength_rate).sum();
    let name = format!("breath_{}", surrogate.name());
    let mut table = Table::new(&name, &["time", "set", "x", "y", "z", "surrogate", "concentration", "c_over_q"]);
    table.header = header(cfg, &format!("breath --surrogate {}", surrogate.name()), &model)?;
    for ((t, (label, p)), c) in tasks.iter().zip(values) {
        let norm = if rate > 0.0 { c / rate } else { 0.0 };
        table.push(vec![
            (*t).into(),
            label.as_str().into(),
            p[0].into(),
            p[1].into(),
            p[2].into(),
            surrogate.name().into(),
            c.into(),
            norm.into(),
        ]);
    }
    Ok(table)
}

/// One sampler placement and window.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleCase {
    pub sampler: String,
    pub spec: SamplerSpec,
}

/// Expand samplers × window ends × sweep positions in output order.
pub fn sample_cases(cfg: &ScenarioConfig) -> Result<Vec<SampleCase>> {
    let d = cfg
        .detection
        .as_ref()
        .ok_or_else(|| Error::invalid("detection", "this command needs a [detection] section"))?;
    let mut cases = Vec::new();
    for s in &d.samplers {
        for &t in &d.times {
            let centers: Vec<[f64; 3]> = match &d.sweep {
                Some(sw) => super::config::sweep(sw.from, sw.to, sw.points)
                    .into_iter()
                    .map(|c| {
                        let mut p = s.center;
                        p[sw.axis.index()] = c;
                        p
                    })
                    .collect(),
                None => vec![s.center],
            };
            for center in centers {
                cases.push(SampleCase {
                    sampler: s.name.clone(),
                    spec: SamplerSpec {
                        center,
                        edges: s.edges,
                        sampling_time: s.sampling_time,
                        sample_end: t,
                    },
                });
            }
        }
    }
    Ok(cases)
}

fn collected(cfg: &ScenarioConfig, model: &RoomModel, cases: &[SampleCase]) -> Result<Vec<f64>> {
    let sources = cfg.exhalations();
    if sources.is_empty() {
        return Err(Error::invalid("sources", "no exhalation source defined"));
    }
    let footprint = cfg.detection.as_ref().map(|d| d.footprint).unwrap_or_default().footprint();
    for c in cases {
        c.spec.validate(model)?;
    }
    cases
        .par_iter()
        .map(|c| {
            sources
                .iter()
                .map(|s| sampled_concentration(model, s, footprint, &c.spec, &cfg.quadrature))
                .sum::<Result<f64>>()
        })
        .collect()
}

const SAMPLE_COLUMNS: [&str; 11] = [
    "sampler", "time", "x", "y", "z", "edge_x", "edge_y", "edge_z", "sampling_time", "volume", "c_samp",
];

fn sample_row(c: &SampleCase, value: f64) -> Vec<Cell> {
    let s = &c.spec;
    vec![
        c.sampler.as_str().into(),
        s.sample_end.into(),
        s.center[0].into(),
        s.center[1].into(),
        s.center[2].into(),
        s.edges[0].into(),
        s.edges[1].into(),
        s.edges[2].into(),
        s.sampling_time.into(),
        s.volume().into(),
        value.into(),
    ]
}

/// Sampled amount `C_samp` for every sampler case.
pub fn sample_table(cfg: &ScenarioConfig) -> Result<Table> {
    let model = cfg.source_model()?;
    let cases = sample_cases(cfg)?;
    let values = collected(cfg, &model, &cases)?;
    let mut table = Table::new("sample", &SAMPLE_COLUMNS);
    table.header = header(cfg, "sample", &model)?;
    for (c, v) in cases.iter().zip(values) {
        table.push(sample_row(c, v));
    }
    Ok(table)
}

/// Collected amounts within this fraction of the largest one are treated as
/// zero when negative.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// Miss-detection probability for every sampler case and detector setting.
pub fn pmd_table(cfg: &ScenarioConfig) -> Result<Table> {
    let model = cfg.source_model()?;
    let d = cfg
        .detection
        .as_ref()
        .ok_or_else(|| Error::invalid("detection", "this command needs a [detection] section"))?;
    let cases = sample_cases(cfg)?;
    let values = collected(cfg, &model, &cases)?;
    let q_p = match d.q_p {
        Some(q) => q,
        None => cfg.exhalations().iter().map(|s| s.strength_rate).sum(),
    };
    let detectors: Vec<DetectorSpec> = if d.gamma_db.is_empty() {
        d.detector.into_iter().collect()
    } else {
        d.gamma_db.iter().map(|&db| DetectorSpec::from_db(db)).collect()
    };
    let mut columns = SAMPLE_COLUMNS.to_vec();
    columns.extend(["gamma_db", "gamma", "p_md", "log10_p_md"]);
    let mut table = Table::new("pmd", &columns);
    table.header = header(cfg, "pmd", &model)?;
    table.header.push(format!("q_p: {q_p:e}"));
    // Far from the source the series cancels to round-off of either sign.
    let floor = ROUNDOFF_FLOOR * values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    table.header.push(format!("c_samp round-off floor for p_md: {floor:e}"));
    for (c, v) in cases.iter().zip(values) {
        let v_det = if v < 0.0 && v >= -floor { 0.0 } else { v };
        for det in &detectors {
            let gamma = det.gamma_ratio_linear(q_p)?;
            let p = miss_detection_probability(det, v_det, q_p)?;
            let log_p = log10_miss_detection_probability(det, v_det, q_p)?;
            let mut row = sample_row(c, v);
            row.extend([Cell::from(10.0 * gamma.log10()), gamma.into(), p.into(), log_p.into()]);
            table.push(row);
        }
    }
    Ok(table)
}

/// Every table the configuration has sections for.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<Table>> {
    let mut out = Vec::new();
    if cfg.grid.is_some() && !cfg.point_sources().is_empty() {
        out.push(point_table(cfg)?);
    }
    if cfg.grid.is_some() && !cfg.exhalations().is_empty() {
        for s in SurrogateChoice::ALL {
            out.push(breath_table(cfg, s)?);
        }
    }
    if cfg.detection.is_some() {
        out.push(sample_table(cfg)?);
        out.push(pmd_table(cfg)?);
    }
    if cfg.truncation.is_some() {
        out.extend(super::truncation::truncation_tables(cfg)?);
    }
    if cfg.validation.is_some() {
        out.extend(super::validate::validate_tables(cfg)?.tables);
    }
    if out.is_empty() {
        return Err(Error::invalid("config", "no grid, detection, truncation or validation section to run"));
    }
    Ok(out)
}
