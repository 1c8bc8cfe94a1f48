use faer::c64;

use super::grid::Grid2D;
use super::physics::{BackgroundModel, EPS_0};
use crate::error::{Error, Result};

/// Per-cell material description of a scene on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastMap {
    grid: Grid2D,
    background: BackgroundModel,
    eps_r: Vec<f64>,
    sigma: Vec<f64>,
}

impl ContrastMap {
    /// Homogeneous map: every cell equals the background.
    pub fn empty(grid: Grid2D, background: BackgroundModel) -> Self {
        let n = grid.len();
        Self {
            grid,
            background,
            eps_r: vec![background.eps_r; n],
            sigma: vec![background.sigma; n],
        }
    }

    pub fn from_parts(
        grid: Grid2D,
        background: BackgroundModel,
        eps_r: Vec<f64>,
        sigma: Vec<f64>,
    ) -> Result<Self> {
        if eps_r.len() != grid.len() || sigma.len() != grid.len() {
            return Err(Error::DimMismatch(format!(
                "material arrays of length {}/{} on a grid of {} cells",
                eps_r.len(),
                sigma.len(),
                grid.len()
            )));
        }
        if let Some(e) = eps_r.iter().find(|e| !(e.is_finite() && **e >= 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "relative permittivity must be >= 1, got {e}"
            )));
        }
        if let Some(s) = sigma.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "conductivity must be >= 0, got {s}"
            )));
        }
        Ok(Self {
            grid,
            background,
            eps_r,
            sigma,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn background(&self) -> &BackgroundModel {
        &self.background
    }

    pub fn eps_r(&self) -> &[f64] {
        &self.eps_r
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub(crate) fn set(&mut self, n: usize, eps_r: f64, sigma: f64) {
        self.eps_r[n] = eps_r;
        self.sigma[n] = sigma;
    }

    /// Absolute complex permittivity of cell `n` at angular frequency `omega`.
    pub fn permittivity(&self, n: usize, omega: f64) -> c64 {
        c64::new(EPS_0 * self.eps_r[n], -self.sigma[n] / omega)
    }

    /// Contrast `eps(n) - eps_bg` in F/m, for every cell.
    pub fn contrast(&self, omega: f64) -> Vec<c64> {
        let bg = self.background.permittivity(omega);
        (0..self.grid.len())
            .map(|n| self.permittivity(n, omega) - bg)
            .collect()
    }

    pub fn is_target(&self, n: usize) -> bool {
        self.eps_r[n] != self.background.eps_r || self.sigma[n] != self.background.sigma
    }

    /// Cells whose material differs from the background.
    pub fn support(&self) -> Vec<bool> {
        (0..self.grid.len()).map(|n| self.is_target(n)).collect()
    }

    pub fn target_cells(&self) -> Vec<usize> {
        (0..self.grid.len()).filter(|&n| self.is_target(n)).collect()
    }

    pub fn is_empty(&self) -> bool {
        !(0..self.grid.len()).any(|n| self.is_target(n))
    }
}
