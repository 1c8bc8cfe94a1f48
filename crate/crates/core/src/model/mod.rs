//! Grids, physical constants, measurement geometry, scenes and configuration.

pub mod config;
pub mod contrast;
pub mod grid;
pub mod measurement;
pub mod physics;
pub mod presets;
pub mod scene;

pub use config::{load_config, parse_config, ExperimentConfig, SimulationSettings};
pub use contrast::ContrastMap;
pub use grid::{Grid2D, Point};
pub use measurement::{ring, CvStrategy, MeasurementConfig, RowRole, RowSelection};
pub use physics::{BackgroundModel, FrequencySet, EPS_0, MU_0, SPEED_OF_LIGHT};
pub use scene::{rasterize_scene, rasterize_scene_averaged, Material, SceneItem, SceneSpec, Shape};

use serde::Serialize;

/// Relative slack on the cells-per-wavelength rule.
pub const GRID_RULE_SLACK: f64 = 1e-3;

/// Minimum number of cells per shortest wavelength.
pub const CELLS_PER_WAVELENGTH: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRuleReport {
    pub pass: bool,
    pub delta: f64,
    pub delta_max: f64,
}

/// Checks `delta <= min(lambda) / 15` up to [`GRID_RULE_SLACK`]. Wavelengths
/// are free-space values `c / f`.
pub fn check_grid_rule(grid: &Grid2D, freqs: &FrequencySet) -> GridRuleReport {
    check_spacing(grid.delta, freqs.min_wavelength())
}

pub(crate) fn check_spacing(delta: f64, wavelength: f64) -> GridRuleReport {
    let delta_max = wavelength / CELLS_PER_WAVELENGTH;
    GridRuleReport {
        pass: delta <= delta_max * (1.0 + GRID_RULE_SLACK),
        delta,
        delta_max,
    }
}
