//! Synthetic data generation: scattered-field FDFD solves on a padded
//! simulation grid, then propagation of the induced contrast sources to
//! the receivers with the free-space Green's function.

use faer::linalg::matmul::matmul;
use faer::{c64, Accum, Mat, Par};

use super::{factorize, ExtendedGrid};
use crate::dataset::{NoiseInfo, ScatterDataset};
use crate::error::{Error, Result};
use crate::green::{green_2d, line_source_field};
use crate::model::{
    rasterize_scene_averaged, ContrastMap, ExperimentConfig, FrequencySet, Grid2D,
    MeasurementConfig, Point, SimulationSettings, MU_0,
};

/// Incident, total and scattered fields on the extended grid for one source
/// and frequency. `e_tot = e_inc + e_sct` up to rounding.
#[derive(Debug, Clone)]
pub struct FieldSolution {
    pub ext: ExtendedGrid,
    pub e_inc: Vec<c64>,
    pub e_tot: Vec<c64>,
    pub e_sct: Vec<c64>,
}

/// Grid covering the same box as `grid` with cells `refinement` times smaller.
pub fn simulation_grid(grid: &Grid2D, refinement: f64) -> Result<Grid2D> {
    if !(refinement >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "refinement must be >= 1, got {refinement}"
        )));
    }
    let d = grid.delta / refinement;
    let nx = (grid.nx as f64 * refinement - 1e-9).ceil() as usize;
    let ny = (grid.ny as f64 * refinement - 1e-9).ceil() as usize;
    let c = grid.midpoint();
    Grid2D::new(c.x - 0.5 * nx as f64 * d, c.y - 0.5 * ny as f64 * d, d, nx, ny)
}

fn extended_for(contrast: &ContrastMap, freqs: &FrequencySet, settings: &SimulationSettings) -> Result<ExtendedGrid> {
    ExtendedGrid::with_padding(*contrast.grid(), freqs.max_wavelength(), settings.pml_cells)
}

/// Bilinear interpolation of a cell-centred field on `grid`.
fn interpolate(grid: &Grid2D, field: &[c64], p: &Point) -> c64 {
    let u = ((p.x - grid.x0) / grid.delta - 0.5).clamp(0.0, (grid.nx - 1) as f64);
    let v = ((p.y - grid.y0) / grid.delta - 0.5).clamp(0.0, (grid.ny - 1) as f64);
    let i0 = (u.floor() as usize).min(grid.nx.saturating_sub(2));
    let j0 = (v.floor() as usize).min(grid.ny.saturating_sub(2));
    let (i1, j1) = ((i0 + 1).min(grid.nx - 1), (j0 + 1).min(grid.ny - 1));
    let (fu, fv) = (u - i0 as f64, v - j0 as f64);
    field[grid.flatten(i0, j0)] * ((1.0 - fu) * (1.0 - fv))
        + field[grid.flatten(i1, j0)] * (fu * (1.0 - fv))
        + field[grid.flatten(i0, j1)] * ((1.0 - fu) * fv)
        + field[grid.flatten(i1, j1)] * (fu * fv)
}

/// Fields for a single line source, mainly for diagnostics.
pub fn simulate_fields(
    contrast: &ContrastMap,
    source: Point,
    freqs: &FrequencySet,
    freq_index: usize,
    settings: &SimulationSettings,
) -> Result<FieldSolution> {
    let bg = *contrast.background();
    bg.require_lossless()?;
    let ext = extended_for(contrast, freqs, settings)?;
    let fact = factorize(&ext, &bg, Some(contrast), freqs, freq_index, settings)?;
    let omega = freqs.omega(freq_index);
    let k = bg.real_wavenumber(omega);
    let g = *ext.grid();
    let e_inc: Vec<c64> = (0..g.len())
        .map(|n| line_source_field(omega, k, g.center(n).distance(&source)))
        .collect();
    let rhs = fact.system().scattering_source(|n| e_inc[n]);
    let e_sct = fact.solve(&rhs)?;
    let e_tot = e_inc.iter().zip(&e_sct).map(|(a, b)| a + b).collect();
    Ok(FieldSolution {
        ext,
        e_inc,
        e_tot,
        e_sct,
    })
}

/// Simulates the scattered field at every measured receiver for every
/// source and frequency. `contrast` lives on the simulation grid.
pub fn simulate_scene(
    contrast: &ContrastMap,
    measurement: &MeasurementConfig,
    freqs: &FrequencySet,
    settings: &SimulationSettings,
) -> Result<ScatterDataset> {
    let bg = *contrast.background();
    bg.require_lossless()?;
    let ext = extended_for(contrast, freqs, settings)?;
    let g = *ext.grid();
    let core = *contrast.grid();

    let mut interior = Vec::new();
    for (q, r) in measurement.receivers().iter().enumerate() {
        if ext.in_pml(r) {
            return Err(Error::ReceiverInPml { index: q });
        }
        if ext.in_physical(r) {
            interior.push(q);
        }
    }

    let targets = contrast.target_cells();
    let nq = measurement.n_receivers();
    let np = measurement.n_sources();
    if targets.is_empty() {
        return Ok(ScatterDataset::zeros(freqs.clone(), measurement.clone()));
    }

    let mut blocks = Vec::with_capacity(freqs.len());
    for i in 0..freqs.len() {
        let omega = freqs.omega(i);
        let k = bg.real_wavenumber(omega);
        let fact = factorize(&ext, &bg, Some(contrast), freqs, i, settings)?;
        let sys = fact.system();

        let e_inc = |n_ext: usize, p: usize| {
            line_source_field(omega, k, g.center(n_ext).distance(&measurement.sources()[p]))
        };
        let mut rhs = Mat::<c64>::zeros(g.len(), np);
        for &t in &targets {
            let n = ext.core_index(t);
            let dk = (sys.k2(n) - sys.background_k2()) / MU_0;
            for p in 0..np {
                rhs[(n, p)] = dk * e_inc(n, p);
            }
        }
        let e_sct = fact.solve_many(rhs.as_ref())?;

        // Contrast sources j = chi e_tot on the target cells.
        let chi = contrast.contrast(omega);
        let cur = Mat::<c64>::from_fn(targets.len(), np, |r, p| {
            let n = ext.core_index(targets[r]);
            chi[targets[r]] * (e_inc(n, p) + e_sct[(n, p)])
        });
        let scale = omega * omega * MU_0 * core.cell_area();
        let prop = Mat::<c64>::from_fn(nq, targets.len(), |q, r| {
            let d = measurement.receivers()[q].distance(&core.center(targets[r]));
            green_2d(k, d) * scale
        });
        let mut block = Mat::<c64>::zeros(nq, np);
        matmul(block.as_mut(), Accum::Replace, prop.as_ref(), cur.as_ref(), c64::new(1.0, 0.0), Par::Seq);
        for &q in &interior {
            let rx = measurement.receivers()[q];
            for p in 0..np {
                let col: Vec<c64> = (0..g.len()).map(|n| e_sct[(n, p)]).collect();
                block[(q, p)] = interpolate(&g, &col, &rx);
            }
        }
        blocks.push(block);
    }
    ScatterDataset::new(freqs.clone(), measurement.clone(), blocks, NoiseInfo::default())
}

/// Rasterizes the configured scene on the simulation grid and simulates it.
pub fn simulate_experiment(cfg: &ExperimentConfig) -> Result<ScatterDataset> {
    let sim = simulation_grid(&cfg.grid, cfg.simulation.refinement)?;
    let contrast = rasterize_scene_averaged(&cfg.scene, &sim, cfg.background, cfg.simulation.material_samples)?;
    simulate_scene(&contrast, &cfg.measurement, &cfg.frequencies, &cfg.simulation)
}
