//! Finite-difference frequency-domain solver for the 2-D TM Helmholtz
//! equation on a padded grid terminated by a stretched-coordinate PML.
//!
//! The discrete operator is `A = (1/mu0) S (-lap_h - k^2)` with
//! `S = diag(s_x s_y)`, so `A e = omega^2 j` for a current density `j` and
//! the matrix is complex symmetric.

mod mie;
mod simulate;

pub use mie::{mie_reference, Cylinder, Illumination};
pub use simulate::{
    simulate_experiment, simulate_fields, simulate_scene, simulation_grid, FieldSolution,
};

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{c64, Mat, MatRef};

use crate::error::{Error, Result};
use crate::model::{
    check_spacing, BackgroundModel, ContrastMap, FrequencySet, Grid2D, Point, SimulationSettings,
    MU_0, SPEED_OF_LIGHT,
};

/// Relative residual every accepted solve must reach.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// Polynomial grading order of the PML conductivity.
const PML_ORDER: i32 = 3;

/// A core grid surrounded by `pad` cells of background and `pml` absorbing cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedGrid {
    grid: Grid2D,
    core: Grid2D,
    pad: usize,
    pml: usize,
}

impl ExtendedGrid {
    pub fn new(core: Grid2D, pad: usize, pml: usize) -> Result<Self> {
        let m = pad + pml;
        let d = core.delta;
        let grid = Grid2D::new(
            core.x0 - m as f64 * d,
            core.y0 - m as f64 * d,
            d,
            core.nx + 2 * m,
            core.ny + 2 * m,
        )?;
        Ok(Self {
            grid,
            core,
            pad,
            pml,
        })
    }

    /// Padding of `max(lambda_max / 2, 10 delta)` before the absorbing layer.
    pub fn with_padding(core: Grid2D, lambda_max: f64, pml: usize) -> Result<Self> {
        let width = (0.5 * lambda_max).max(10.0 * core.delta);
        let pad = (width / core.delta - 1e-9).ceil() as usize;
        Self::new(core, pad, pml)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn core(&self) -> &Grid2D {
        &self.core
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    pub fn pml(&self) -> usize {
        self.pml
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Extended-grid index of core cell `n`.
    pub fn core_index(&self, n: usize) -> usize {
        let m = self.pad + self.pml;
        let (ix, iy) = self.core.unflatten(n);
        self.grid.flatten(ix + m, iy + m)
    }

    pub fn is_pml_cell(&self, ix: usize, iy: usize) -> bool {
        ix < self.pml
            || iy < self.pml
            || ix >= self.grid.nx - self.pml
            || iy >= self.grid.ny - self.pml
    }

    fn physical_bounds(&self) -> (f64, f64, f64, f64) {
        let w = self.pml as f64 * self.grid.delta;
        (
            self.grid.x0 + w,
            self.grid.x_max() - w,
            self.grid.y0 + w,
            self.grid.y_max() - w,
        )
    }

    /// True if `p` lies inside the meshed domain but within the absorbing layer.
    pub fn in_pml(&self, p: &Point) -> bool {
        self.grid.contains(p) && !self.in_physical(p)
    }

    /// True if `p` lies inside the meshed domain, excluding the absorbing layer.
    pub fn in_physical(&self, p: &Point) -> bool {
        let (x0, x1, y0, y1) = self.physical_bounds();
        p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1
    }
}

/// PML stretch factors at cell centres (`n`) and faces (`n + 1`) along one axis.
fn stretch_factors(
    n: usize,
    pml: usize,
    delta: f64,
    omega: f64,
    wave_speed: f64,
    reflection: f64,
) -> (Vec<c64>, Vec<c64>) {
    let thickness = pml as f64 * delta;
    let sigma_max = if pml == 0 {
        0.0
    } else {
        (PML_ORDER + 1) as f64 * wave_speed * (1.0 / reflection).ln() / (2.0 * thickness)
    };
    let s = |u: f64| {
        let depth = (pml as f64 - u).max(u - (n - pml) as f64).max(0.0) * delta;
        if depth == 0.0 {
            return c64::new(1.0, 0.0);
        }
        let sigma = sigma_max * (depth / thickness).powi(PML_ORDER);
        c64::new(1.0, -sigma / omega)
    };
    let centers = (0..n).map(|k| s(k as f64 + 0.5)).collect();
    let faces = (0..=n).map(|k| s(k as f64)).collect();
    (centers, faces)
}

/// Assembled FDFD stiffness matrix for one frequency, stored row-compressed.
#[derive(Debug, Clone)]
pub struct FdfdSystem {
    omega: f64,
    ext: ExtendedGrid,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<c64>,
    /// Effective squared wavenumber used on the diagonal of each cell.
    k2: Vec<c64>,
    background_k2: c64,
}

/// Squared wavenumber as it enters the stencil, optionally with the
/// angle-averaged fourth-order dispersion of the 5-point Laplacian removed.
fn stencil_k2(k2: c64, delta: f64, correct: bool) -> c64 {
    if correct {
        k2 * (1.0 - k2.re * delta * delta / 16.0)
    } else {
        k2
    }
}

/// Assembles the system on `ext` for frequency `freq_index`. `contrast`, when
/// given, must live on the core grid of `ext`.
pub fn assemble_fdfd(
    ext: &ExtendedGrid,
    background: &BackgroundModel,
    contrast: Option<&ContrastMap>,
    freqs: &FrequencySet,
    freq_index: usize,
    settings: &SimulationSettings,
) -> Result<FdfdSystem> {
    let rule = check_spacing(ext.grid.delta, freqs.wavelength(freq_index));
    if !rule.pass {
        return Err(Error::GridTooCoarse {
            delta: rule.delta,
            max: rule.delta_max,
        });
    }
    if let Some(c) = contrast {
        if !c.grid().same_as(&ext.core) {
            return Err(Error::GridMismatch(
                "contrast map does not live on the core grid".into(),
            ));
        }
    }
    let omega = freqs.omega(freq_index);
    let g = ext.grid;
    let d = g.delta;
    let correct = settings.dispersion_correction;
    let wave_speed = SPEED_OF_LIGHT / background.eps_r.sqrt();
    let (sxc, sxf) = stretch_factors(g.nx, ext.pml, d, omega, wave_speed, settings.pml_reflection);
    let (syc, syf) = stretch_factors(g.ny, ext.pml, d, omega, wave_speed, settings.pml_reflection);

    let kb2 = omega * omega * MU_0 * background.permittivity(omega);
    let background_k2 = stencil_k2(kb2, d, correct);
    let mut k2 = vec![background_k2; g.len()];
    if let Some(c) = contrast {
        for n in c.target_cells() {
            let kn = omega * omega * MU_0 * c.permittivity(n, omega);
            k2[ext.core_index(n)] = stencil_k2(kn, d, correct);
        }
    }

    let inv = 1.0 / (MU_0 * d * d);
    let mut row_ptr = Vec::with_capacity(g.len() + 1);
    let mut col_idx = Vec::with_capacity(5 * g.len());
    let mut values = Vec::with_capacity(5 * g.len());
    row_ptr.push(0);
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let row = g.flatten(ix, iy);
            let cw = syc[iy] / sxf[ix];
            let ce = syc[iy] / sxf[ix + 1];
            let cs = sxc[ix] / syf[iy];
            let cn = sxc[ix] / syf[iy + 1];
            let diag = (cw + ce + cs + cn) * inv - sxc[ix] * syc[iy] * k2[row] / MU_0;
            if iy > 0 {
                col_idx.push(row - g.nx);
                values.push(-cs * inv);
            }
            if ix > 0 {
                col_idx.push(row - 1);
                values.push(-cw * inv);
            }
            col_idx.push(row);
            values.push(diag);
            if ix + 1 < g.nx {
                col_idx.push(row + 1);
                values.push(-ce * inv);
            }
            if iy + 1 < g.ny {
                col_idx.push(row + g.nx);
                values.push(-cn * inv);
            }
            row_ptr.push(col_idx.len());
        }
    }
    Ok(FdfdSystem {
        omega,
        ext: *ext,
        row_ptr,
        col_idx,
        values,
        k2,
        background_k2,
    })
}

impl FdfdSystem {
    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn ext(&self) -> &ExtendedGrid {
        &self.ext
    }

    pub fn dim(&self) -> usize {
        self.ext.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `n`, in increasing column order.
    pub fn row(&self, n: usize) -> Vec<(usize, c64)> {
        let r = self.row_ptr[n]..self.row_ptr[n + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
            .collect()
    }

    pub fn diagonal(&self) -> Vec<c64> {
        (0..self.dim())
            .map(|n| {
                let r = self.row_ptr[n]..self.row_ptr[n + 1];
                let k = self.col_idx[r.clone()]
                    .iter()
                    .position(|&c| c == n)
                    .expect("diagonal is stored");
                self.values[r.start + k]
            })
            .collect()
    }

    /// Stencil wavenumber squared of extended cell `n`.
    pub fn k2(&self, n: usize) -> c64 {
        self.k2[n]
    }

    pub fn background_k2(&self) -> c64 {
        self.background_k2
    }

    pub fn apply(&self, x: &[c64]) -> Vec<c64> {
        (0..self.dim())
            .map(|n| {
                let mut acc = c64::new(0.0, 0.0);
                for k in self.row_ptr[n]..self.row_ptr[n + 1] {
                    acc += self.values[k] * x[self.col_idx[k]];
                }
                acc
            })
            .collect()
    }

    pub fn apply_transpose(&self, x: &[c64]) -> Vec<c64> {
        let mut out = vec![c64::new(0.0, 0.0); self.dim()];
        for n in 0..self.dim() {
            for k in self.row_ptr[n]..self.row_ptr[n + 1] {
                out[self.col_idx[k]] += self.values[k] * x[n];
            }
        }
        out
    }

    /// Equivalent source `S (k^2 - k_bg^2) e_inc / mu0` that drives the
    /// scattered field of the cells whose wavenumber differs from the background.
    pub fn scattering_source(&self, e_inc: impl Fn(usize) -> c64) -> Vec<c64> {
        (0..self.dim())
            .map(|n| {
                let dk = self.k2[n] - self.background_k2;
                if dk == c64::new(0.0, 0.0) {
                    c64::new(0.0, 0.0)
                } else {
                    dk * e_inc(n) / MU_0
                }
            })
            .collect()
    }
}

/// Sparse LU factorization of an [`FdfdSystem`], with residual-checked solves.
pub struct FdfdFactorization {
    system: FdfdSystem,
    lu: Lu<usize, c64>,
}

impl std::fmt::Debug for FdfdFactorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FdfdFactorization")
            .field("dim", &self.system.dim())
            .field("nnz", &self.system.nnz())
            .finish()
    }
}

impl FdfdFactorization {
    pub fn new(system: FdfdSystem) -> Result<Self> {
        let n = system.dim();
        let mut triplets = Vec::with_capacity(system.nnz());
        for r in 0..n {
            for k in system.row_ptr[r]..system.row_ptr[r + 1] {
                triplets.push(Triplet::new(r, system.col_idx[k], system.values[k]));
            }
        }
        let a = SparseColMat::<usize, c64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::SingularMatrix(format!("{e:?}")))?;
        let lu = a
            .sp_lu()
            .map_err(|e| Error::SingularMatrix(format!("{e:?}")))?;
        Ok(Self { system, lu })
    }

    pub fn system(&self) -> &FdfdSystem {
        &self.system
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    /// Solves `A x = b` for one right-hand side.
    pub fn solve(&self, b: &[c64]) -> Result<Vec<c64>> {
        let m = self.solve_many(Mat::from_fn(b.len(), 1, |i, _| b[i]).as_ref())?;
        Ok((0..b.len()).map(|i| m[(i, 0)]).collect())
    }

    /// Solves `A^T x = b` for one right-hand side.
    pub fn solve_transpose(&self, b: &[c64]) -> Result<Vec<c64>> {
        let m = self.solve_transpose_many(Mat::from_fn(b.len(), 1, |i, _| b[i]).as_ref())?;
        Ok((0..b.len()).map(|i| m[(i, 0)]).collect())
    }

    pub fn solve_many(&self, b: MatRef<'_, c64>) -> Result<Mat<c64>> {
        self.solve_checked(b, false)
    }

    pub fn solve_transpose_many(&self, b: MatRef<'_, c64>) -> Result<Mat<c64>> {
        self.solve_checked(b, true)
    }

    fn raw_solve(&self, x: &mut Mat<c64>, transpose: bool) {
        if transpose {
            self.lu.solve_transpose_in_place(x.as_mut());
        } else {
            self.lu.solve_in_place(x.as_mut());
        }
    }

    fn solve_checked(&self, b: MatRef<'_, c64>, transpose: bool) -> Result<Mat<c64>> {
        let n = self.dim();
        if b.nrows() != n {
            return Err(Error::DimMismatch(format!(
                "right-hand side has {} rows, system has {n}",
                b.nrows()
            )));
        }
        let mut x = b.to_owned();
        self.raw_solve(&mut x, transpose);
        for _ in 0..4 {
            let r = self.residual(&x, b, transpose);
            let worst = (0..b.ncols())
                .map(|j| relative(r.col(j), b.col(j)))
                .fold(0.0, f64::max);
            if !worst.is_finite() {
                return Err(Error::SingularMatrix("non-finite solution".into()));
            }
            if worst <= SOLVE_TOLERANCE {
                return Ok(x);
            }
            let mut d = r;
            self.raw_solve(&mut d, transpose);
            x += &d;
        }
        let r = self.residual(&x, b, transpose);
        let worst = (0..b.ncols())
            .map(|j| relative(r.col(j), b.col(j)))
            .fold(0.0, f64::max);
        if worst <= SOLVE_TOLERANCE {
            Ok(x)
        } else {
            Err(Error::SingularMatrix(format!(
                "relative residual {worst:.2e} after refinement"
            )))
        }
    }

    /// `b - op(A) x`.
    fn residual(&self, x: &Mat<c64>, b: MatRef<'_, c64>, transpose: bool) -> Mat<c64> {
        let mut r = b.to_owned();
        for j in 0..x.ncols() {
            let col: Vec<c64> = (0..x.nrows()).map(|i| x[(i, j)]).collect();
            let ax = if transpose {
                self.system.apply_transpose(&col)
            } else {
                self.system.apply(&col)
            };
            for (i, v) in ax.into_iter().enumerate() {
                r[(i, j)] -= v;
            }
        }
        r
    }
}

fn relative(r: faer::ColRef<'_, c64>, b: faer::ColRef<'_, c64>) -> f64 {
    let nb = b.norm_l2();
    let nr = r.norm_l2();
    if nb == 0.0 {
        nr
    } else {
        nr / nb
    }
}

/// Assembles and factorizes in one step.
pub fn factorize(
    ext: &ExtendedGrid,
    background: &BackgroundModel,
    contrast: Option<&ContrastMap>,
    freqs: &FrequencySet,
    freq_index: usize,
    settings: &SimulationSettings,
) -> Result<FdfdFactorization> {
    FdfdFactorization::new(assemble_fdfd(
        ext, background, contrast, freqs, freq_index, settings,
    )?)
}

/// Solves `A e = source`.
pub fn solve_field(fact: &FdfdFactorization, source: &[c64]) -> Result<Vec<c64>> {
    if source.len() != fact.dim() {
        return Err(Error::DimMismatch(format!(
            "source has {} entries, system has {}",
            source.len(),
            fact.dim()
        )));
    }
    fact.solve(source)
}
