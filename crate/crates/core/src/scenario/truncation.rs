use rayon::prelude::*;

use super::config::{AvgOver, ScenarioConfig, TruncationSpec};
use super::run::header;
use super::table::Table;
use crate::error::{Error, Result};
use crate::greens::{shape_neg, shape_pos, AxisKernel, ModeWeights, RoomModel, SeriesSettings};

/// Error of the `N`-mode series against a reference with many more modes,
/// along one axis of a point release.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncationStudy {
    pub times: Vec<f64>,
    pub modes: Vec<usize>,
    /// `max_abs[i][j]`: maximum over the line of `|C_ref - C_N|` for
    /// `modes[i]` at `times[j]`.
    pub max_abs: Vec<Vec<f64>>,
    /// `max_abs` divided by the maximum of `|C_ref|` at that time.
    pub max_rel: Vec<Vec<f64>>,
    /// Per-mode averages following `avg_over`.
    pub avg_abs: Vec<f64>,
    pub avg_rel: Vec<f64>,
    /// Smallest `N` meeting `target` at each time.
    pub required: Vec<usize>,
    pub peak: Vec<f64>,
    pub avg_over: AvgOver,
    pub target: f64,
}

/// Run the study configured in `[truncation]`, overriding its mode list and
/// reference count.
pub fn truncation_study(cfg: &ScenarioConfig, modes: &[usize], reference: usize) -> Result<TruncationStudy> {
    let spec = cfg
        .truncation
        .as_ref()
        .ok_or_else(|| Error::invalid("truncation", "this command needs a [truncation] section"))?;
    if modes.iter().any(|&n| n == 0 || n > reference) {
        return Err(Error::invalid("truncation.modes", "mode counts must lie in 1..=reference"));
    }
    let (kernel, weights) = study_kernel(cfg, spec, reference)?;
    let l = kernel.length();
    let xs: Vec<f64> = (0..spec.points).map(|i| l * i as f64 / (spec.points - 1) as f64).collect();

    // Per time: error of every N up to the last non-underflowing mode at
    // every point.
    let per_time = spec
        .times
        .iter()
        .map(|&t| time_errors(&kernel, &weights, &xs, t, modes))
        .collect::<Result<Vec<_>>>()?;

    let nt = spec.times.len();
    let mut max_abs = vec![vec![0.0; nt]; modes.len()];
    let mut max_rel = vec![vec![0.0; nt]; modes.len()];
    let mut required = Vec::with_capacity(nt);
    let mut peak = Vec::with_capacity(nt);
    for (j, te) in per_time.iter().enumerate() {
        peak.push(te.peak);
        for (i, _) in modes.iter().enumerate() {
            let a = te.at_modes[i].iter().fold(0.0f64, |m, v| m.max(*v));
            max_abs[i][j] = a;
            max_rel[i][j] = a / te.peak;
        }
        let need = te
            .max_by_n
            .iter()
            .position(|&e| e / te.peak <= spec.target)
            .map(|k| k + 1)
            .unwrap_or(te.max_by_n.len() + 1);
        required.push(need);
    }

    let (avg_abs, avg_rel) = match spec.avg_over {
        AvgOver::Time => (
            max_abs.iter().map(|r| mean(r)).collect(),
            max_rel.iter().map(|r| mean(r)).collect(),
        ),
        AvgOver::Space => {
            let mut abs = Vec::with_capacity(modes.len());
            let mut rel = Vec::with_capacity(modes.len());
            for i in 0..modes.len() {
                let worst_abs: Vec<f64> = (0..xs.len())
                    .map(|p| per_time.iter().map(|te| te.at_modes[i][p]).fold(0.0, f64::max))
                    .collect();
                let worst_rel: Vec<f64> = (0..xs.len())
                    .map(|p| per_time.iter().map(|te| te.at_modes[i][p] / te.peak).fold(0.0, f64::max))
                    .collect();
                abs.push(mean(&worst_abs));
                rel.push(mean(&worst_rel));
            }
            (abs, rel)
        }
    };

    Ok(TruncationStudy {
        times: spec.times.clone(),
        modes: modes.to_vec(),
        max_abs,
        max_rel,
        avg_abs,
        avg_rel,
        required,
        peak,
        avg_over: spec.avg_over,
        target: spec.target,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn study_kernel(cfg: &ScenarioConfig, spec: &TruncationSpec, reference: usize) -> Result<(AxisKernel, ModeWeights)> {
    let source = cfg
        .point_sources()
        .first()
        .copied()
        .ok_or_else(|| Error::invalid("sources", "the truncation study needs a point source"))?;
    let a = spec.axis.index();
    let settings = SeriesSettings {
        max_modes: reference,
        ..cfg.series
    };
    let kernel = AxisKernel::solve(cfg.room.axes()[a], &settings)?;
    let weights = ModeWeights::new(&kernel, &source.axis_sources()[a])?;
    Ok((kernel, weights))
}

struct TimeErrors {
    /// `|C_ref - C_N|` at each point for each studied `N`.
    at_modes: Vec<Vec<f64>>,
    /// Maximum over points of `|C_ref - C_N|` for `N = 1, 2, …`.
    max_by_n: Vec<f64>,
    peak: f64,
}

fn time_errors(kernel: &AxisKernel, w: &ModeWeights, xs: &[f64], t: f64, modes: &[usize]) -> Result<TimeErrors> {
    let s = t - w.release_time;
    if !(s > 0.0) {
        return Err(Error::invalid("truncation.times", format!("{t} is not after the release")));
    }
    let roots = &kernel.spectrum().positive_roots;
    let beta = kernel.beta();
    let decay: Vec<f64> = (0..roots.len())
        .map(|m| (kernel.positive_rate(m) * s).exp())
        .take_while(|&e| e > 0.0)
        .collect();
    let live = decay.len();

    let per_point: Vec<(f64, Vec<f64>)> = xs
        .par_iter()
        .map(|&x| {
            let mut base = 0.0;
            if let (Some(wn), Some(lam), Some(rate)) = (w.negative, kernel.spectrum().negative_root, kernel.negative_rate()) {
                base += wn.mul(shape_neg(lam, beta, x)).times_exp(rate * s);
            }
            if let Some(wz) = w.zero {
                base += wz * (1.0 + beta * x);
            }
            let terms: Vec<f64> = (0..live).map(|m| w.positive[m] * shape_pos(roots[m], beta, x) * decay[m]).collect();
            // tail[N] = Σ_{m ≥ N} terms, accumulated from the small end.
            let mut tail = vec![0.0; live + 1];
            for m in (0..live).rev() {
                tail[m] = tail[m + 1] + terms[m];
            }
            (base + tail[0], tail)
        })
        .collect();

    let peak = per_point.iter().map(|(c, _)| c.abs()).fold(0.0, f64::max);
    let mut max_by_n = vec![0.0f64; live];
    for (_, tail) in &per_point {
        for n in 1..=live {
            max_by_n[n - 1] = max_by_n[n - 1].max(tail[n].abs());
        }
    }
    let at_modes = modes
        .iter()
        .map(|&n| per_point.iter().map(|(_, tail)| tail[n.min(live)].abs()).collect())
        .collect();
    Ok(TimeErrors { at_modes, max_by_n, peak })
}

/// Tables for the configured study: per-time errors, averages and required
/// mode counts.
pub fn truncation_tables(cfg: &ScenarioConfig) -> Result<Vec<Table>> {
    let spec = cfg
        .truncation
        .as_ref()
        .ok_or_else(|| Error::invalid("truncation", "this command needs a [truncation] section"))?;
    let study = truncation_study(cfg, &spec.modes, spec.reference)?;
    let settings = SeriesSettings {
        max_modes: spec.reference,
        ..cfg.series
    };
    let model = RoomModel::new(cfg.room, settings)?;
    let head = header(cfg, "truncation", &model)?;

    let mut errors = Table::new("truncation", &["modes", "time", "max_abs_error", "max_rel_error"]);
    errors.header = head.clone();
    for (i, &n) in study.modes.iter().enumerate() {
        for (j, &t) in study.times.iter().enumerate() {
            errors.push(vec![n.into(), t.into(), study.max_abs[i][j].into(), study.max_rel[i][j].into()]);
        }
    }

    let avg_label = match study.avg_over {
        AvgOver::Time => "time",
        AvgOver::Space => "space",
    };
    let mut avg = Table::new("truncation_average", &["modes", "avg_over", "avg_abs_error", "avg_rel_error"]);
    avg.header = head.clone();
    for (i, &n) in study.modes.iter().enumerate() {
        avg.push(vec![n.into(), avg_label.into(), study.avg_abs[i].into(), study.avg_rel[i].into()]);
    }

    let mut req = Table::new("truncation_required", &["time", "target", "required_modes", "peak"]);
    req.header = head;
    for (j, &t) in study.times.iter().enumerate() {
        req.push(vec![t.into(), study.target.into(), study.required[j].into(), study.peak[j].into()]);
    }
    Ok(vec![errors, avg, req])
}
