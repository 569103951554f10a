use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detection::DetectorSpec;
use crate::error::{Error, Result};
use crate::greens::{PointSource, Room, RoomModel, SeriesSettings};
use crate::oracle::RobinClosure;
use crate::quadrature::QuadratureConfig;
use crate::source::{ExhalationSource, Footprint, PlanarSurrogate};

/// Complete description of one run, read from a TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Free-form label copied into output headers.
    #[serde(default)]
    pub name: String,
    pub room: Room,
    #[serde(default)]
    pub series: SeriesSettings,
    /// Positive roots per axis for planar-source and sampler runs.
    #[serde(default = "default_source_modes")]
    pub source_modes: usize,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub sources: Vec<SourceEvent>,
    pub grid: Option<GridSpec>,
    pub detection: Option<DetectionSpec>,
    pub truncation: Option<TruncationSpec>,
    pub validation: Option<ValidationSpec>,
    pub output: Option<OutputSpec>,
}

fn default_source_modes() -> usize {
    200
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceEvent {
    Point(PointSource),
    Exhalation(ExhalationSource),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisName {
    X,
    Y,
    Z,
}

impl AxisName {
    pub fn index(self) -> usize {
        match self {
            AxisName::X => 0,
            AxisName::Y => 1,
            AxisName::Z => 2,
        }
    }

    pub fn label(self) -> &'static str {
        ["x", "y", "z"][self.index()]
    }
}

/// Evaluation points and times for field commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub times: Vec<f64>,
    #[serde(default)]
    pub points: Vec<[f64; 3]>,
    #[serde(default)]
    pub lines: Vec<LineSpec>,
}

/// Equally spaced points along one axis through a fixed point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub axis: AxisName,
    pub through: [f64; 3],
    /// Defaults to `0`.
    pub from: Option<f64>,
    /// Defaults to the axis length.
    pub to: Option<f64>,
    pub points: usize,
}

impl LineSpec {
    pub fn coordinates(&self, room: &Room) -> Vec<f64> {
        let a = self.axis.index();
        let lo = self.from.unwrap_or(0.0);
        let hi = self.to.unwrap_or(room.lengths()[a]);
        sweep(lo, hi, self.points)
    }

    pub fn positions(&self, room: &Room) -> Vec<[f64; 3]> {
        let a = self.axis.index();
        self.coordinates(room)
            .into_iter()
            .map(|c| {
                let mut p = self.through;
                p[a] = c;
                p
            })
            .collect()
    }
}

pub(crate) fn sweep(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        n => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Shape of the emitter used by planar and sampler commands.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateChoice {
    Lower,
    Equal,
    Upper,
    #[default]
    Circular,
}

impl SurrogateChoice {
    pub const ALL: [SurrogateChoice; 4] = [Self::Lower, Self::Equal, Self::Upper, Self::Circular];

    pub fn footprint(self) -> Footprint {
        match self {
            Self::Lower => Footprint::Square(PlanarSurrogate::LowerSquare),
            Self::Equal => Footprint::Square(PlanarSurrogate::EqualAreaSquare),
            Self::Upper => Footprint::Square(PlanarSurrogate::UpperSquare),
            Self::Circular => Footprint::Circle,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Lower => "lower",
            Self::Equal => "equal",
            Self::Upper => "upper",
            Self::Circular => "circular",
        }
    }
}

/// A sampler geometry without its window end, which comes from
/// [`DetectionSpec::times`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedSampler {
    pub name: String,
    pub center: [f64; 3],
    pub edges: [f64; 3],
    pub sampling_time: f64,
}

/// Moves every sampler centre along one axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: AxisName,
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSpec {
    #[serde(default)]
    pub footprint: SurrogateChoice,
    /// Window end times.
    pub times: Vec<f64>,
    pub samplers: Vec<NamedSampler>,
    pub sweep: Option<SweepSpec>,
    /// `Γ` values in dB; when empty, `detector` is used as given.
    #[serde(default)]
    pub gamma_db: Vec<f64>,
    pub detector: Option<DetectorSpec>,
    /// Source strength entering `Γ`; defaults to the summed emission rate.
    pub q_p: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AvgOver {
    /// Maximum over space at each time, averaged over times.
    #[default]
    Time,
    /// Maximum over times at each point, averaged over points.
    Space,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSpec {
    #[serde(default = "axis_x")]
    pub axis: AxisName,
    pub times: Vec<f64>,
    pub modes: Vec<usize>,
    #[serde(default = "default_reference")]
    pub reference: usize,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub avg_over: AvgOver,
    /// Relative error target for the required-modes table.
    #[serde(default = "default_target")]
    pub target: f64,
}

fn axis_x() -> AxisName {
    AxisName::X
}
fn default_reference() -> usize {
    100_000
}
fn default_points() -> usize {
    201
}
fn default_target() -> f64 {
    1e-4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSpec {
    #[serde(default = "axis_x")]
    pub axis: AxisName,
    pub times: Vec<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Spatial step of the residual stencils.
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    /// Time step of the residual stencil.
    #[serde(default = "default_fd_dt")]
    pub fd_dt: f64,
    #[serde(default = "default_residual_tol")]
    pub tolerance: f64,
    pub fdm: Option<FdmCheck>,
    pub adi: Option<AdiCheck>,
}

fn default_fd_step() -> f64 {
    1e-3
}
fn default_fd_dt() -> f64 {
    0.5
}
fn default_residual_tol() -> f64 {
    1e-8
}

/// 1-D Crank–Nicolson comparison along the validation axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdmCheck {
    pub nodes: usize,
    pub max_dt: f64,
    pub seed_time: f64,
    pub end_time: f64,
    #[serde(default)]
    pub closure: RobinClosure,
    pub tolerance: f64,
}

/// 3-D ADI comparison at one probe point, Richardson-extrapolated from a
/// coarse grid and its half-spacing refinement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdiCheck {
    pub probe: [f64; 3],
    /// Coarse grid spacing per axis.
    pub spacing: [f64; 3],
    pub max_dt: f64,
    pub seed_time: f64,
    pub end_time: f64,
    #[serde(default)]
    pub closure: RobinClosure,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

/// Command-line overrides applied on top of a parsed file.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub modes: Option<usize>,
    pub tol: Option<f64>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: Overrides) -> Result<()> {
        if let Some(n) = o.modes {
            self.series.max_modes = n;
            self.source_modes = n;
        }
        if let Some(tol) = o.tol {
            self.series.tail_tol = tol;
        }
        self.validate()
    }

    /// SHA-256 of the resolved configuration in canonical TOML form.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        self.room.validate()?;
        self.series.validate()?;
        self.quadrature.validate()?;
        if self.source_modes == 0 {
            return Err(Error::invalid("source_modes", "must be at least 1"));
        }
        for (i, s) in self.sources.iter().enumerate() {
            match s {
                SourceEvent::Point(p) => p.validate(&self.room)?,
                SourceEvent::Exhalation(e) => {
                    let [_, ly, lz] = self.room.lengths();
                    let [yp, zp] = e.center;
                    let lx = self.room.x.length;
                    let fits = e.plane_x > 0.0 && e.plane_x < lx && e.radius >= 0.0 && e.radius <= yp.min(ly - yp).min(zp).min(lz - zp);
                    if !fits {
                        return Err(Error::invalid(format!("sources[{i}]"), "disc must lie inside the room cross-section"));
                    }
                    if !(e.end > e.start && e.start.is_finite() && e.end.is_finite()) {
                        return Err(Error::invalid(format!("sources[{i}].end"), "emission must end after it starts"));
                    }
                    if !(e.strength_rate.is_finite() && e.strength_rate >= 0.0) {
                        return Err(Error::invalid(format!("sources[{i}].strength_rate"), "must be finite and >= 0"));
                    }
                }
            }
        }
        if let Some(g) = &self.grid {
            check_times("grid.times", &g.times)?;
            if g.points.is_empty() && g.lines.iter().all(|l| l.points == 0) {
                return Err(Error::invalid("grid", "no evaluation points"));
            }
            for (i, p) in g.points.iter().enumerate() {
                self.room.check_point(*p, &format!("grid.points[{i}]"))?;
            }
            for (i, l) in g.lines.iter().enumerate() {
                for p in l.positions(&self.room) {
                    self.room.check_point(p, &format!("grid.lines[{i}]"))?;
                }
            }
        }
        if let Some(d) = &self.detection {
            check_times("detection.times", &d.times)?;
            if d.samplers.is_empty() {
                return Err(Error::invalid("detection.samplers", "at least one sampler is required"));
            }
            if let Some(s) = &d.sweep {
                if s.points == 0 {
                    return Err(Error::invalid("detection.sweep.points", "must be at least 1"));
                }
            }
            if d.gamma_db.is_empty() && d.detector.is_none() {
                return Err(Error::invalid("detection", "needs gamma_db values or a detector"));
            }
            if let Some(q) = d.q_p {
                if !(q.is_finite() && q > 0.0) {
                    return Err(Error::invalid("detection.q_p", "must be finite and > 0"));
                }
            }
        }
        if let Some(t) = &self.truncation {
            check_times("truncation.times", &t.times)?;
            if t.modes.is_empty() || t.modes.iter().any(|&n| n == 0) {
                return Err(Error::invalid("truncation.modes", "need at least one positive mode count"));
            }
            if t.modes.iter().any(|&n| n > t.reference) {
                return Err(Error::invalid("truncation.reference", "must be at least every studied mode count"));
            }
            if t.points < 2 {
                return Err(Error::invalid("truncation.points", "need at least 2 points"));
            }
            if !(t.target > 0.0) {
                return Err(Error::invalid("truncation.target", "must be > 0"));
            }
        }
        if let Some(v) = &self.validation {
            check_times("validation.times", &v.times)?;
            if v.points < 2 || !(v.fd_step > 0.0) || !(v.fd_dt > 0.0) || !(v.tolerance > 0.0) {
                return Err(Error::invalid("validation", "points >= 2 and positive fd_step, fd_dt, tolerance required"));
            }
        }
        Ok(())
    }

    pub fn point_sources(&self) -> Vec<PointSource> {
        self.sources
            .iter()
            .filter_map(|s| match s {
                SourceEvent::Point(p) => Some(*p),
                _ => None,
            })
            .collect()
    }

    pub fn exhalations(&self) -> Vec<ExhalationSource> {
        self.sources
            .iter()
            .filter_map(|s| match s {
                SourceEvent::Exhalation(e) => Some(*e),
                _ => None,
            })
            .collect()
    }

    /// Room model for point-source commands.
    pub fn point_model(&self) -> Result<RoomModel> {
        RoomModel::new(self.room, self.series)
    }

    /// Room model with the smaller root budget used for planar sources.
    pub fn source_model(&self) -> Result<RoomModel> {
        let settings = SeriesSettings {
            max_modes: self.source_modes.min(self.series.max_modes),
            ..self.series
        };
        RoomModel::new(self.room, settings)
    }

    /// Effective source settings for headers.
    pub fn source_settings(&self) -> SeriesSettings {
        SeriesSettings {
            max_modes: self.source_modes.min(self.series.max_modes),
            ..self.series
        }
    }
}

fn check_times(field: &str, times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::invalid(field, "at least one time is required"));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid(field, "times must be finite"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
name = "unit"

[room.x]
length = 1.0
diffusivity = 2.42e-5
deposition_lo = 1e-8
deposition_hi = 1e-2

[room.y]
length = 2.0
diffusivity = 2.42e-5
deposition_lo = 0.0
deposition_hi = 0.0

[room.z]
length = 3.0
diffusivity = 2.42e-5
deposition_lo = 0.0
deposition_hi = 0.0

[[sources]]
kind = "point"
position = [0.5, 1.0, 1.5]
strength = 1.0
release_time = 0.0

[[sources]]
kind = "exhalation"
plane_x = 0.3
center = [1.0, 1.5]
radius = 0.1
start = 0.0
end = 5.0

[grid]
times = [60.0]

[[grid.lines]]
axis = "y"
through = [0.5, 1.0, 1.5]
points = 5
"#;

    #[test]
    fn round_trip_preserves_content() {
        let cfg = ScenarioConfig::from_toml(BASE).unwrap();
        let again = ScenarioConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash().unwrap(), again.hash().unwrap());
        assert_eq!(cfg.point_sources().len(), 1);
        assert_eq!(cfg.exhalations().len(), 1);
        assert_eq!(cfg.exhalations()[0].strength_rate, 1.0);
    }

    #[test]
    fn unknown_keys_are_rejected_everywhere() {
        let top = format!("colour = 1\n{BASE}");
        assert!(matches!(ScenarioConfig::from_toml(&top), Err(Error::Config(_))));
        let nested = BASE.replace("[grid]\n", "[grid]\nstep = 2\n");
        assert!(matches!(ScenarioConfig::from_toml(&nested), Err(Error::Config(_))));
        let in_source = BASE.replace("strength = 1.0", "strength = 1.0\nspin = 3");
        assert!(matches!(ScenarioConfig::from_toml(&in_source), Err(Error::Config(_))));
        let bad_kind = BASE.replace("kind = \"point\"", "kind = \"sneeze\"");
        assert!(matches!(ScenarioConfig::from_toml(&bad_kind), Err(Error::Config(_))));
    }

    #[test]
    fn semantic_errors_are_validation_errors() {
        let outside = BASE.replace("position = [0.5, 1.0, 1.5]", "position = [1.5, 1.0, 1.5]");
        assert!(ScenarioConfig::from_toml(&outside).unwrap_err().is_validation());
        let empty = BASE.replace("points = 5", "points = 0");
        assert!(ScenarioConfig::from_toml(&empty).unwrap_err().is_validation());
        let disc = BASE.replace("radius = 0.1", "radius = 1.2");
        assert!(ScenarioConfig::from_toml(&disc).unwrap_err().is_validation());
        let no_times = BASE.replace("times = [60.0]", "times = []");
        assert!(ScenarioConfig::from_toml(&no_times).unwrap_err().is_validation());
    }

    #[test]
    fn overrides_change_the_hash() {
        let mut cfg = ScenarioConfig::from_toml(BASE).unwrap();
        let before = cfg.hash().unwrap();
        cfg.apply(Overrides {
            modes: Some(50),
            tol: Some(1e-6),
        })
        .unwrap();
        assert_eq!(cfg.series.max_modes, 50);
        assert_eq!(cfg.source_modes, 50);
        assert_eq!(cfg.series.tail_tol, 1e-6);
        assert_ne!(before, cfg.hash().unwrap());
        assert!(cfg.apply(Overrides { modes: Some(0), tol: None }).is_err());
    }

    #[test]
    fn lines_span_the_axis() {
        let cfg = ScenarioConfig::from_toml(BASE).unwrap();
        let line = cfg.grid.as_ref().unwrap().lines[0];
        assert_eq!(line.coordinates(&cfg.room), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(line.positions(&cfg.room)[1], [0.5, 0.5, 1.5]);
        assert_eq!(sweep(1.0, 2.0, 1), vec![1.0]);
        assert!(sweep(1.0, 2.0, 0).is_empty());
    }

    #[test]
    fn shipped_configs_parse() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut n = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "toml") {
                ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
                n += 1;
            }
        }
        assert!(n >= 9);
    }
}
