//! Sensing matrices mapping normalized contrast sources on the inversion
//! grid to scattered fields at the receivers.
//!
//! For frequency `i` the operator stores one kernel `G_i` of size
//! `receiver catalog x cells`; the matrix of data column `(p, i)` is the
//! subset of rows of `G_i` that source `p` measures. Contrast-source and
//! gradient matrices are `cells x (P * I)` with the source index running
//! fastest, matching [`ScatterDataset`] column order.

mod cache;

pub use cache::{cache_key, load_kernels, save_kernels, CACHE_MAGIC};

use faer::linalg::matmul::matmul;
use faer::{c64, Accum, Mat, MatRef, Par};
use rayon::prelude::*;

use crate::dataset::ScatterDataset;
use crate::error::{Error, Result};
use crate::fdfd::{factorize, ExtendedGrid, FdfdFactorization};
use crate::green::green_2d;
use crate::model::{
    BackgroundModel, FrequencySet, Grid2D, MeasurementConfig, RowRole, RowSelection, SimulationSettings, MU_0,
};

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
const ONE: c64 = c64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone)]
pub struct SensingOperator {
    grid: Grid2D,
    freqs: FrequencySet,
    measurement: MeasurementConfig,
    kernels: Vec<Mat<c64>>,
    /// Role of every `(receiver, source)` pair, `None` when unmeasured.
    mask: Vec<Vec<Option<RowRole>>>,
}

fn role_mask(m: &MeasurementConfig) -> Vec<Vec<Option<RowRole>>> {
    (0..m.n_receivers())
        .map(|q| (0..m.n_sources()).map(|p| m.role(p, q)).collect())
        .collect()
}

impl SensingOperator {
    pub fn new(
        grid: Grid2D,
        freqs: FrequencySet,
        measurement: MeasurementConfig,
        kernels: Vec<Mat<c64>>,
    ) -> Result<Self> {
        if kernels.len() != freqs.len() {
            return Err(Error::DimMismatch(format!(
                "{} kernels for {} frequencies",
                kernels.len(),
                freqs.len()
            )));
        }
        for k in &kernels {
            if k.nrows() != measurement.n_receivers() || k.ncols() != grid.len() {
                return Err(Error::DimMismatch(format!(
                    "kernel is {}x{}, expected {}x{}",
                    k.nrows(),
                    k.ncols(),
                    measurement.n_receivers(),
                    grid.len()
                )));
            }
            if k.col_iter().any(|c| c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
                return Err(Error::InvalidArgument("non-finite kernel entry".into()));
            }
        }
        let mask = role_mask(&measurement);
        Ok(Self {
            grid,
            freqs,
            measurement,
            kernels,
            mask,
        })
    }

    /// Operator for an abstract problem with one measurement column per
    /// kernel: every kernel becomes its own "frequency" seen by a single
    /// source, on a one-row placeholder grid.
    pub fn from_columns(kernels: Vec<Mat<c64>>) -> Result<Self> {
        let (nq, n) = kernels.first().map_or((0, 0), |k| (k.nrows(), k.ncols()));
        if nq == 0 || n == 0 {
            return Err(Error::DimMismatch("empty kernel".into()));
        }
        let grid = Grid2D::new(0.0, 0.0, 1e-3, n, 1)?;
        let freqs = FrequencySet::new((1..=kernels.len()).map(|i| i as f64 * 1e9).collect())?;
        let receivers = crate::model::ring(1e3, nq, 0.0, 360.0 / nq as f64);
        let m = MeasurementConfig::full(vec![crate::model::Point::new(2e3, 0.0)], receivers)?;
        Self::new(grid, freqs, m, kernels)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn freqs(&self) -> &FrequencySet {
        &self.freqs
    }

    pub fn measurement(&self) -> &MeasurementConfig {
        &self.measurement
    }

    pub fn kernels(&self) -> &[Mat<c64>] {
        &self.kernels
    }

    pub fn n_cells(&self) -> usize {
        self.grid.len()
    }

    /// `P * I`.
    pub fn n_columns(&self) -> usize {
        self.freqs.len() * self.measurement.n_sources()
    }

    pub fn column_index(&self, p: usize, i: usize) -> usize {
        i * self.measurement.n_sources() + p
    }

    /// Same kernels under a different role split of the same receiver masks.
    pub fn with_measurement(&self, measurement: MeasurementConfig) -> Result<Self> {
        if measurement.all_active() != self.measurement.all_active()
            || measurement.receivers() != self.measurement.receivers()
            || measurement.sources() != self.measurement.sources()
        {
            return Err(Error::DimMismatch("measurement geometry differs from the operator's".into()));
        }
        let mask = role_mask(&measurement);
        Ok(Self {
            measurement,
            mask,
            ..self.clone()
        })
    }

    /// Dense matrix of column `(p, i)`: one row per active receiver of `p`.
    pub fn phi(&self, p: usize, i: usize) -> Mat<c64> {
        let rows = self.measurement.active(p);
        let k = &self.kernels[i];
        Mat::from_fn(rows.len(), self.n_cells(), |r, n| k[(rows[r], n)])
    }

    /// Rejects datasets whose frequencies, geometry or masks differ.
    pub fn check_dataset(&self, data: &ScatterDataset) -> Result<()> {
        let m = data.measurement();
        if data.freqs().hz() != self.freqs.hz()
            || m.all_active() != self.measurement.all_active()
            || m.n_receivers() != self.measurement.n_receivers()
            || m.n_sources() != self.measurement.n_sources()
        {
            return Err(Error::DimMismatch(format!(
                "dataset has {} columns over {} receivers, operator has {} over {}",
                data.n_columns(),
                m.n_receivers(),
                self.n_columns(),
                self.measurement.n_receivers()
            )));
        }
        Ok(())
    }

    fn check_j(&self, j: MatRef<'_, c64>) -> Result<()> {
        if j.nrows() != self.n_cells() || j.ncols() != self.n_columns() {
            return Err(Error::DimMismatch(format!(
                "contrast sources are {}x{}, expected {}x{}",
                j.nrows(),
                j.ncols(),
                self.n_cells(),
                self.n_columns()
            )));
        }
        Ok(())
    }

    fn keep(&self, q: usize, p: usize, rows: RowSelection) -> bool {
        self.mask[q][p].is_some_and(|r| rows.accepts(r))
    }

    pub(crate) fn apply_mask(&self, b: &mut Mat<c64>, rows: RowSelection) {
        for p in 0..b.ncols() {
            for q in 0..b.nrows() {
                if !self.keep(q, p, rows) {
                    b[(q, p)] = ZERO;
                }
            }
        }
    }

    /// Predicted data `Phi_{p,i} j_{p,i}` as one `receivers x sources` block
    /// per frequency; rows outside `rows` are zero.
    pub fn apply_forward(&self, j: MatRef<'_, c64>, rows: RowSelection) -> Result<Vec<Mat<c64>>> {
        self.check_j(j)?;
        let np = self.measurement.n_sources();
        Ok((0..self.freqs.len())
            .into_par_iter()
            .map(|i| {
                let mut b = Mat::<c64>::zeros(self.measurement.n_receivers(), np);
                matmul(b.as_mut(), Accum::Replace, self.kernels[i].as_ref(), j.subcols(i * np, np), ONE, Par::Seq);
                self.apply_mask(&mut b, rows);
                b
            })
            .collect())
    }

    /// `Phi_{p,i}^H r_{p,i}` for every column, using only the selected rows of `r`.
    pub fn apply_adjoint(&self, r: &[Mat<c64>], rows: RowSelection) -> Result<Mat<c64>> {
        let (nq, np) = (self.measurement.n_receivers(), self.measurement.n_sources());
        if r.len() != self.freqs.len() || r.iter().any(|b| b.nrows() != nq || b.ncols() != np) {
            return Err(Error::DimMismatch(format!(
                "residual must be {} blocks of {nq}x{np}",
                self.freqs.len()
            )));
        }
        let parts: Vec<Mat<c64>> = (0..self.freqs.len())
            .into_par_iter()
            .map(|i| {
                let mut masked = r[i].clone();
                self.apply_mask(&mut masked, rows);
                let mut out = Mat::<c64>::zeros(self.n_cells(), np);
                matmul(out.as_mut(), Accum::Replace, self.kernels[i].adjoint(), masked.as_ref(), ONE, Par::Seq);
                out
            })
            .collect();
        let mut g = Mat::<c64>::zeros(self.n_cells(), self.n_columns());
        for (i, part) in parts.iter().enumerate() {
            g.as_mut().subcols_mut(i * np, np).copy_from(part);
        }
        Ok(g)
    }

    /// `data - Phi J` on the selected rows, zero elsewhere.
    pub fn residual(&self, j: MatRef<'_, c64>, data: &ScatterDataset, rows: RowSelection) -> Result<Vec<Mat<c64>>> {
        self.check_dataset(data)?;
        let mut pred = self.apply_forward(j, rows)?;
        for (b, y) in pred.iter_mut().zip(data.blocks()) {
            let mut masked = y.clone();
            self.apply_mask(&mut masked, rows);
            *b = masked - &*b;
        }
        Ok(pred)
    }
}

/// Frobenius norm of a list of blocks, summed in a fixed order.
pub fn blocks_norm(blocks: &[Mat<c64>]) -> f64 {
    blocks
        .iter()
        .map(|b| b.norm_l2().powi(2))
        .sum::<f64>()
        .sqrt()
}

fn check_receivers(grid: &Grid2D, m: &MeasurementConfig) -> Result<()> {
    match m.receivers().iter().position(|r| grid.contains(r)) {
        Some(index) => Err(Error::ReceiverInsideGrid { index }),
        None => Ok(()),
    }
}

/// Analytic kernels for a homogeneous background:
/// `G_i[q, n] = omega_i mu0 g_i(x_q, x_n) delta^2`.
pub fn build_sensing_greens(
    grid: &Grid2D,
    measurement: &MeasurementConfig,
    freqs: &FrequencySet,
    background: &BackgroundModel,
) -> Result<SensingOperator> {
    background.require_lossless()?;
    check_receivers(grid, measurement)?;
    let kernels = (0..freqs.len())
        .into_par_iter()
        .map(|i| {
            let omega = freqs.omega(i);
            let k = background.real_wavenumber(omega);
            let scale = omega * MU_0 * grid.cell_area();
            let rx = measurement.receivers();
            Mat::from_fn(rx.len(), grid.len(), |q, n| green_2d(k, rx[q].distance(&grid.center(n))) * scale)
        })
        .collect();
    SensingOperator::new(*grid, freqs.clone(), measurement.clone(), kernels)
}

/// Odd sub-sampling factor relating the inversion grid to an FDFD core grid.
fn subgrid_factor(grid: &Grid2D, ext: &ExtendedGrid) -> Result<usize> {
    let core = ext.core();
    let r = (grid.delta / core.delta).round() as usize;
    let aligned = r >= 1
        && r % 2 == 1
        && (r as f64 * core.delta - grid.delta).abs() <= 1e-9 * grid.delta
        && core.nx == grid.nx * r
        && core.ny == grid.ny * r
        && (core.x0 - grid.x0).abs() <= 1e-6 * grid.delta
        && (core.y0 - grid.y0).abs() <= 1e-6 * grid.delta;
    if aligned {
        Ok(r)
    } else {
        Err(Error::GridMismatch(
            "FDFD core must tile the inversion grid with an odd number of cells per side".into(),
        ))
    }
}

/// Kernels from background FDFD solves. By reciprocity row `q` is the field
/// radiated by a line source at receiver `q`; inside the mesh it is obtained
/// with one transpose solve per receiver, driven by a total-field /
/// scattered-field boundary around the core grid, then sampled at the
/// inversion cell centres.
pub fn build_sensing_fdfd(
    facts: &[FdfdFactorization],
    grid: &Grid2D,
    measurement: &MeasurementConfig,
    freqs: &FrequencySet,
    background: &BackgroundModel,
) -> Result<SensingOperator> {
    if facts.len() != freqs.len() {
        return Err(Error::DimMismatch(format!(
            "{} factorizations for {} frequencies",
            facts.len(),
            freqs.len()
        )));
    }
    background.require_lossless()?;
    let mut kernels = Vec::with_capacity(freqs.len());
    for (i, fact) in facts.iter().enumerate() {
        let sys = fact.system();
        if (sys.omega() - freqs.omega(i)).abs() > 1e-9 * freqs.omega(i) {
            return Err(Error::DimMismatch(format!("factorization {i} is for another frequency")));
        }
        let ext = *sys.ext();
        let r = subgrid_factor(grid, &ext)?;
        let g = ext.grid();
        let m = ext.pad() + ext.pml();
        let inside = |n: usize| {
            let (ix, iy) = g.unflatten(n);
            ix >= m && iy >= m && ix < m + ext.core().nx && iy < m + ext.core().ny
        };
        let omega = freqs.omega(i);
        let k = background.real_wavenumber(omega);
        let scale = omega * MU_0 * grid.cell_area();
        let rx = measurement.receivers();

        // b = (A Q - Q A) e_inc touches only the two cell layers on either
        // side of the core boundary.
        let mut boundary = Vec::new();
        for n in 0..g.len() {
            let row = sys.row(n);
            let qn = inside(n);
            let terms: Vec<(usize, c64)> = row
                .into_iter()
                .filter(|&(c, _)| inside(c) != qn)
                .map(|(c, v)| (c, if qn { -v } else { v }))
                .collect();
            if !terms.is_empty() {
                boundary.push((n, terms));
            }
        }
        let rhs_rows: Vec<Vec<c64>> = boundary
            .par_iter()
            .map(|(_, terms)| {
                (0..rx.len())
                    .map(|q| {
                        terms
                            .iter()
                            .map(|&(c, v)| v * green_2d(k, rx[q].distance(&g.center(c))) * scale)
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let mut b = Mat::<c64>::zeros(g.len(), rx.len());
        for ((n, _), vals) in boundary.iter().zip(&rhs_rows) {
            for (q, v) in vals.iter().enumerate() {
                b[(*n, q)] = *v;
            }
        }
        let field = fact.solve_transpose_many(b.as_ref())?;
        let half = r / 2;
        kernels.push(Mat::from_fn(rx.len(), grid.len(), |q, n| {
            let (ix, iy) = grid.unflatten(n);
            field[(g.flatten(m + ix * r + half, m + iy * r + half), q)]
        }));
    }
    SensingOperator::new(*grid, freqs.clone(), measurement.clone(), kernels)
}

/// Background factorizations for [`build_sensing_fdfd`] on a core grid with
/// `refinement` (odd) cells per inversion cell side.
pub fn background_factorizations(
    grid: &Grid2D,
    background: &BackgroundModel,
    freqs: &FrequencySet,
    settings: &SimulationSettings,
    refinement: usize,
) -> Result<Vec<FdfdFactorization>> {
    if refinement == 0 || refinement.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("refinement {refinement} must be odd")));
    }
    let core = Grid2D::new(
        grid.x0,
        grid.y0,
        grid.delta / refinement as f64,
        grid.nx * refinement,
        grid.ny * refinement,
    )?;
    let ext = ExtendedGrid::with_padding(core, freqs.max_wavelength(), settings.pml_cells)?;
    (0..freqs.len())
        .into_par_iter()
        .map(|i| factorize(&ext, background, None, freqs, i, settings))
        .collect()
}

#[cfg(test)]
mod tests;
