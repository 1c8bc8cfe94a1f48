//! Linear sampling method: a qualitative, non-iterative baseline that tests,
//! for every sampling point, whether the field of a point source located
//! there lies in the range of the measured data matrix.

use faer::{c64, Mat};
use rayon::prelude::*;

use crate::dataset::ScatterDataset;
use crate::error::{Error, Result};
use crate::imaging::{ImageField, ImageKind};
use crate::model::{BackgroundModel, Grid2D, Point, MU_0};
use crate::special::hankel2_0;

/// Regularization relative to the largest singular value.
pub const LSM_REGULARIZATION: f64 = 0.01;

/// Zero-filled data matrix of one frequency with its singular system.
#[derive(Debug, Clone)]
pub struct LsmWorkspace {
    /// Receiver catalog x sources.
    pub data: Mat<c64>,
    /// Left singular vectors, one column per retained singular value.
    pub u: Mat<c64>,
    /// Non-increasing singular values.
    pub s: Vec<f64>,
    /// Tikhonov parameter `a`.
    pub a: f64,
    pub omega: f64,
    pub k: f64,
}

/// Catalog x source matrix of scattered fields at frequency `i`, zero where
/// the pair was not measured.
pub fn build_data_matrix(ds: &ScatterDataset, i: usize) -> Result<Mat<c64>> {
    if i >= ds.freqs().len() {
        return Err(Error::EmptyFrequency(i));
    }
    Ok(ds.block(i).clone())
}

impl LsmWorkspace {
    pub fn new(ds: &ScatterDataset, i: usize, background_k: f64) -> Result<Self> {
        let data = build_data_matrix(ds, i)?;
        Self::from_matrix(data, ds.freqs().omega(i), background_k)
    }

    pub fn from_matrix(data: Mat<c64>, omega: f64, k: f64) -> Result<Self> {
        let svd = data
            .thin_svd()
            .map_err(|e| Error::NoConvergence(format!("SVD of the data matrix: {e:?}")))?;
        let sv = svd.S().column_vector();
        let d = data.nrows().min(data.ncols());
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&x, &y| sv[y].re.total_cmp(&sv[x].re));
        let s: Vec<f64> = order.iter().map(|&k| sv[k].re.max(0.0)).collect();
        let u = Mat::from_fn(data.nrows(), d, |r, c| svd.U()[(r, order[c])]);
        let a = LSM_REGULARIZATION * s.first().copied().unwrap_or(0.0);
        Ok(Self { data, u, s, a, omega, k })
    }

    /// `||g||^2` of the Tikhonov-regularized solution of `F g = f`.
    pub fn indicator(&self, f: &[c64]) -> f64 {
        lsm_indicator(&self.u, &self.s, self.a, f)
    }
}

/// `sum_d (s_d / (s_d^2 + a^2))^2 |u_d^H f|^2`.
pub fn lsm_indicator(u: &Mat<c64>, s: &[f64], a: f64, f: &[c64]) -> f64 {
    let mut out = 0.0;
    for (d, &sd) in s.iter().enumerate() {
        let mut proj = c64::new(0.0, 0.0);
        for (q, fq) in f.iter().enumerate() {
            proj += u[(q, d)].conj() * fq;
        }
        let w = sd / (sd * sd + a * a);
        if w.is_finite() {
            out += w * w * proj.norm_sqr();
        }
    }
    out
}

/// Field at the receivers of a unit line source at `x_s`:
/// `f_q = -(omega mu0 / 4) H0^(2)(k |x_s - x_q|)`.
pub fn lsm_rhs(x_s: &Point, receivers: &[Point], omega: f64, k: f64) -> Result<Vec<c64>> {
    receivers
        .iter()
        .enumerate()
        .map(|(q, r)| {
            let d = x_s.distance(r);
            if d == 0.0 {
                return Err(Error::SampleOnReceiver(q));
            }
            Ok(hankel2_0(k * d) * (-omega * MU_0 / 4.0))
        })
        .collect()
}

/// Indicator `||g||^2` at every cell centre of `grid`.
pub fn indicator_map(ws: &LsmWorkspace, grid: &Grid2D, receivers: &[Point]) -> Result<Vec<f64>> {
    (0..grid.len())
        .into_par_iter()
        .map(|n| Ok(ws.indicator(&lsm_rhs(&grid.center(n), receivers, ws.omega, ws.k)?)))
        .collect()
}

/// Normalizes each map by its maximum, averages, and inverts.
pub fn fuse(maps: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = maps.first() else {
        return Err(Error::EmptyFrequency(0));
    };
    let mut acc = vec![0.0; first.len()];
    for (i, map) in maps.iter().enumerate() {
        let top = map.iter().copied().fold(0.0, f64::max);
        if !(top > 0.0) || map.len() != acc.len() {
            return Err(Error::EmptyFrequency(i));
        }
        for (a, v) in acc.iter_mut().zip(map) {
            *a += v / top;
        }
    }
    Ok(acc.iter().map(|a| maps.len() as f64 / a).collect())
}

/// Multi-frequency image `1 / mean_i(||g_i||^2 / max ||g_i||^2)` over the
/// cell centres of `grid`.
pub fn lsm_image(ds: &ScatterDataset, grid: &Grid2D, background: &BackgroundModel) -> Result<ImageField> {
    background.require_lossless()?;
    let nf = ds.freqs().len();
    if nf == 0 {
        return Err(Error::EmptyFrequency(0));
    }
    let rx = ds.measurement().receivers();
    let mut maps = Vec::with_capacity(nf);
    for i in 0..nf {
        let omega = ds.freqs().omega(i);
        let ws = LsmWorkspace::new(ds, i, background.real_wavenumber(omega))?;
        maps.push(indicator_map(&ws, grid, rx)?);
    }
    let values = fuse(&maps)?;
    ImageField::new(*grid, values, ImageKind::Lsm)
}
