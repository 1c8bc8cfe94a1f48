//! JSON experiment configuration.
//!
//! Every length is in meters and every frequency in Hz. Parsing keeps all
//! fields optional so that validation can report every problem at once.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::{Grid2D, Point};
use super::measurement::{ring, CvStrategy, MeasurementConfig};
use super::physics::{BackgroundModel, FrequencySet};
use super::scene::SceneSpec;
use crate::error::{ConfigIssue, Error, IssueKind, Result};
use crate::solver::SolverOptions;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GridSection {
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub y_min: Option<f64>,
    pub y_max: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSection {
    pub eps_r: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    pub radius: Option<f64>,
    pub count: Option<usize>,
    #[serde(default)]
    pub start_deg: f64,
    /// Defaults to an even spread over the full circle.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_deg: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ring: Option<RingSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<Point>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvSection {
    pub count: usize,
    #[serde(flatten)]
    pub strategy: CvStrategy,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReceiverSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ring: Option<RingSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<Point>>,
    /// Receivers whose angle relative to the source lies in `[lo, hi]` degrees
    /// are measured for that source.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub active_arc_deg: Option<[f64; 2]>,
    /// Explicit per-source receiver lists; overrides `active_arc_deg`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub active: Option<Vec<Vec<usize>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSettings {
    /// Ratio between inversion and simulation cell sizes.
    pub refinement: f64,
    pub pml_cells: usize,
    pub pml_reflection: f64,
    /// Sub-samples per cell edge when averaging materials onto the simulation grid.
    pub material_samples: usize,
    /// Compensate the leading-order numerical dispersion of the 5-point stencil.
    pub dispersion_correction: bool,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            refinement: 1.5,
            pml_cells: 10,
            pml_reflection: 1e-4,
            material_samples: 5,
            dispersion_correction: true,
        }
    }
}

/// On-disk configuration document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub grid: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<BackgroundSection>,
    pub frequencies: Option<Vec<f64>>,
    pub sources: Option<SourceSection>,
    pub receivers: Option<ReceiverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSettings>,
}

/// Fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub grid: Grid2D,
    pub background: BackgroundModel,
    pub frequencies: FrequencySet,
    /// Geometry with the cross-validation split already applied.
    pub measurement: MeasurementConfig,
    pub cv: Option<CvSection>,
    pub scene: SceneSpec,
    pub solver: SolverOptions,
    pub simulation: SimulationSettings,
    /// Source document with defaults filled in.
    pub file: ConfigFile,
}

struct Issues(Vec<ConfigIssue>);

impl Issues {
    fn push(&mut self, kind: IssueKind, path: &str, message: impl Into<String>) {
        self.0.push(ConfigIssue {
            kind,
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn missing(&mut self, path: &str) {
        self.push(IssueKind::MissingField, path, "required field is absent");
    }

    fn required<T: Copy>(&mut self, v: Option<T>, path: &str) -> Option<T> {
        if v.is_none() {
            self.missing(path);
        }
        v
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let file: ConfigFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.validate()
}

impl ConfigFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// Checks every section and collects all violations before failing.
    pub fn validate(&self) -> Result<ExperimentConfig> {
        let mut iss = Issues(Vec::new());

        let grid = self.validate_grid(&mut iss);
        let background = self.validate_background(&mut iss);
        let frequencies = self.validate_frequencies(&mut iss);
        let sources = match &self.sources {
            None => {
                iss.missing("sources");
                None
            }
            Some(s) => positions(&mut iss, "sources", s.ring.as_ref(), s.positions.as_ref()),
        };
        let receivers = match &self.receivers {
            None => {
                iss.missing("receivers");
                None
            }
            Some(r) => positions(&mut iss, "receivers", r.ring.as_ref(), r.positions.as_ref()),
        };

        if let Some(g) = &grid {
            for (label, pts) in [("sources", &sources), ("receivers", &receivers)] {
                if let Some(pts) = pts {
                    for (k, p) in pts.iter().enumerate() {
                        if g.contains(p) {
                            iss.push(
                                IssueKind::GeometryViolation,
                                &format!("{label}[{k}]"),
                                format!(
                                    "position ({}, {}) lies inside the inversion grid",
                                    p.x, p.y
                                ),
                            );
                        }
                    }
                }
            }
        }

        let mut measurement = None;
        if let (Some(s), Some(r), Some(rs)) = (&sources, &receivers, &self.receivers) {
            let base = match (&rs.active, rs.active_arc_deg) {
                (Some(active), _) => MeasurementConfig::new(s.clone(), r.clone(), active.clone()),
                (None, arc) => {
                    MeasurementConfig::ring_with_arc(s.clone(), r.clone(), arc.map(|a| (a[0], a[1])))
                }
            };
            match base {
                Err(e) => iss.push(IssueKind::Invalid, "receivers.active", e.to_string()),
                Ok(m) => match rs.cv {
                    None => measurement = Some(m),
                    Some(cv) => match m.split_cv(cv.count, cv.strategy) {
                        Ok(m) => measurement = Some(m),
                        Err(e) => iss.push(IssueKind::Invalid, "receivers.cv.count", e.to_string()),
                    },
                },
            }
        }

        let scene = self.scene.clone().unwrap_or_default();
        for (k, item) in scene.shapes.iter().enumerate() {
            let path = format!("scene.shapes[{k}]");
            if let Err(e) = item.shape.validate() {
                iss.push(IssueKind::BadUnits, &path, e.to_string());
                continue;
            }
            let m = item.material;
            if !m.pec && (m.eps_r < 1.0 || m.sigma < 0.0) {
                iss.push(
                    IssueKind::BadUnits,
                    &path,
                    "material needs eps_r >= 1 and sigma >= 0",
                );
            }
            if let Some(g) = &grid {
                let (x0, x1, y0, y1) = item.shape.bounding_box();
                let tol = 1e-9 * g.delta;
                if x0 < g.x0 - tol || x1 > g.x_max() + tol || y0 < g.y0 - tol || y1 > g.y_max() + tol {
                    iss.push(
                        IssueKind::GeometryViolation,
                        &path,
                        "shape extends outside the inversion grid",
                    );
                }
            }
        }

        let solver = self.solver.unwrap_or_default();
        iss.0.extend(solver.issues("solver"));
        let simulation = self.simulation.unwrap_or_default();
        if !(simulation.refinement >= 1.0) {
            iss.push(IssueKind::Invalid, "simulation.refinement", "must be at least 1");
        }
        if simulation.pml_cells < 2 {
            iss.push(IssueKind::Invalid, "simulation.pml_cells", "must be at least 2");
        }
        if !(simulation.pml_reflection > 0.0 && simulation.pml_reflection < 1.0) {
            iss.push(IssueKind::Invalid, "simulation.pml_reflection", "must lie in (0, 1)");
        }
        if simulation.material_samples == 0 {
            iss.push(IssueKind::Invalid, "simulation.material_samples", "must be at least 1");
        }

        if !iss.0.is_empty() {
            return Err(Error::Config(iss.0));
        }
        let (grid, background, frequencies, measurement) = (
            grid.expect("checked"),
            background.expect("checked"),
            frequencies.expect("checked"),
            measurement.expect("checked"),
        );
        let mut file = self.clone();
        file.background = Some(BackgroundSection {
            eps_r: Some(background.eps_r),
            sigma: Some(background.sigma),
        });
        file.scene = Some(scene.clone());
        file.solver = Some(solver);
        file.simulation = Some(simulation);
        Ok(ExperimentConfig {
            name: self.name.clone().unwrap_or_else(|| "experiment".into()),
            grid,
            background,
            frequencies,
            measurement,
            cv: self.receivers.as_ref().and_then(|r| r.cv),
            scene,
            solver,
            simulation,
            file,
        })
    }

    fn validate_grid(&self, iss: &mut Issues) -> Option<Grid2D> {
        let Some(g) = &self.grid else {
            iss.missing("grid");
            return None;
        };
        let x_min = iss.required(g.x_min, "grid.x_min");
        let x_max = iss.required(g.x_max, "grid.x_max");
        let y_min = iss.required(g.y_min, "grid.y_min");
        let y_max = iss.required(g.y_max, "grid.y_max");
        let delta = iss.required(g.delta, "grid.delta");
        if let Some(d) = delta {
            if !(d > 0.0) {
                iss.push(IssueKind::BadUnits, "grid.delta", format!("spacing must be positive, got {d}"));
            } else if d > 1.0 {
                iss.push(
                    IssueKind::BadUnits,
                    "grid.delta",
                    format!("spacing of {d} m is implausible; lengths are in meters"),
                );
            }
        }
        if let (Some(a), Some(b)) = (x_min, x_max) {
            if b <= a {
                iss.push(IssueKind::Invalid, "grid.x_max", "must exceed grid.x_min");
            }
        }
        if let (Some(a), Some(b)) = (y_min, y_max) {
            if b <= a {
                iss.push(IssueKind::Invalid, "grid.y_max", "must exceed grid.y_min");
            }
        }
        Grid2D::from_bounds(x_min?, x_max?, y_min?, y_max?, delta?).ok()
    }

    fn validate_background(&self, iss: &mut Issues) -> Option<BackgroundModel> {
        let b = self.background.clone().unwrap_or_default();
        let eps_r = b.eps_r.unwrap_or(1.0);
        let sigma = b.sigma.unwrap_or(0.0);
        let mut ok = true;
        if !(eps_r >= 1.0) {
            iss.push(IssueKind::BadUnits, "background.eps_r", format!("must be >= 1, got {eps_r}"));
            ok = false;
        }
        if !(sigma >= 0.0) {
            iss.push(IssueKind::BadUnits, "background.sigma", format!("must be >= 0, got {sigma}"));
            ok = false;
        }
        if ok {
            BackgroundModel::new(eps_r, sigma).ok()
        } else {
            None
        }
    }

    fn validate_frequencies(&self, iss: &mut Issues) -> Option<FrequencySet> {
        let Some(f) = &self.frequencies else {
            iss.missing("frequencies");
            return None;
        };
        if f.is_empty() {
            iss.push(IssueKind::Invalid, "frequencies", "at least one frequency is required");
            return None;
        }
        let mut ok = true;
        for (k, v) in f.iter().enumerate() {
            if !(*v > 0.0) {
                iss.push(IssueKind::BadUnits, &format!("frequencies[{k}]"), format!("must be positive, got {v}"));
                ok = false;
            } else if *v < 1e6 {
                iss.push(
                    IssueKind::BadUnits,
                    &format!("frequencies[{k}]"),
                    format!("{v} Hz is implausible; frequencies are in Hz"),
                );
                ok = false;
            }
        }
        if ok && f.windows(2).any(|w| w[1] <= w[0]) {
            iss.push(IssueKind::Invalid, "frequencies", "must be strictly increasing");
            ok = false;
        }
        if ok {
            FrequencySet::new(f.clone()).ok()
        } else {
            None
        }
    }
}

fn positions(
    iss: &mut Issues,
    label: &str,
    ring_spec: Option<&RingSpec>,
    explicit: Option<&Vec<Point>>,
) -> Option<Vec<Point>> {
    match (ring_spec, explicit) {
        (Some(_), Some(_)) => {
            iss.push(
                IssueKind::Invalid,
                label,
                "give either `ring` or `positions`, not both",
            );
            None
        }
        (None, None) => {
            iss.missing(&format!("{label}.ring"));
            None
        }
        (None, Some(p)) => {
            if p.is_empty() {
                iss.push(IssueKind::Invalid, &format!("{label}.positions"), "list is empty");
                None
            } else {
                Some(p.clone())
            }
        }
        (Some(r), None) => {
            let radius = iss.required(r.radius, &format!("{label}.ring.radius"));
            let count = iss.required(r.count, &format!("{label}.ring.count"));
            if let Some(rad) = radius {
                if !(rad > 0.0) {
                    iss.push(IssueKind::BadUnits, &format!("{label}.ring.radius"), format!("must be positive, got {rad}"));
                }
            }
            if count == Some(0) {
                iss.push(IssueKind::Invalid, &format!("{label}.ring.count"), "must be at least 1");
            }
            let (radius, count) = (radius?, count?);
            if !(radius > 0.0) || count == 0 {
                return None;
            }
            let step = r.step_deg.unwrap_or(360.0 / count as f64);
            Some(ring(radius, count, r.start_deg, step))
        }
    }
}

impl ExperimentConfig {
    pub fn to_json(&self) -> String {
        self.file.to_json()
    }

    /// Copy restricted to the given frequency indices.
    pub fn with_frequencies(&self, indices: &[usize]) -> Result<Self> {
        let frequencies = self.frequencies.subset(indices)?;
        let mut out = self.clone();
        out.file.frequencies = Some(frequencies.hz().to_vec());
        out.frequencies = frequencies;
        Ok(out)
    }
}
