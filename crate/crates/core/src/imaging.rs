//! Images, dB maps, support masks, comparison metrics and image export.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use faer::{c64, MatRef};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ContrastMap, Grid2D, Point};

/// Default threshold for support masks and metrics.
pub const METRIC_LEVEL_DB: f64 = -10.0;
/// Lower end of the display range.
pub const DISPLAY_FLOOR_DB: f64 = -25.0;
/// dB values are clamped here before averaging, so that exact zeros in a
/// sparse image do not produce `-inf` means.
pub const METRIC_FLOOR_DB: f64 = -60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageKind {
    Gmmv,
    Lsm,
}

/// Non-negative image over the cells of a grid, linear or in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageField {
    pub grid: Grid2D,
    pub values: Vec<f64>,
    pub kind: ImageKind,
    pub db: bool,
}

impl ImageField {
    pub fn new(grid: Grid2D, values: Vec<f64>, kind: ImageKind) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimMismatch(format!(
                "{} image values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("image value {v} is not a finite non-negative number")));
        }
        Ok(Self {
            grid,
            values,
            kind,
            db: false,
        })
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> usize {
        let m = self.max();
        self.values.iter().position(|&v| v == m).unwrap_or(0)
    }
}

/// `gamma_n = sum over all columns of |J[n, c]|^2`.
pub fn gmmv_image(grid: &Grid2D, j: MatRef<'_, c64>) -> Result<ImageField> {
    if j.nrows() != grid.len() {
        return Err(Error::DimMismatch(format!(
            "J has {} rows for {} cells",
            j.nrows(),
            grid.len()
        )));
    }
    let mut g = vec![0.0; grid.len()];
    for c in 0..j.ncols() {
        for (n, v) in g.iter_mut().enumerate() {
            *v += j[(n, c)].norm_sqr();
        }
    }
    ImageField::new(*grid, g, ImageKind::Gmmv)
}

/// `10 log10(gamma / max gamma)`; cells with `gamma = 0` become `-inf`.
pub fn to_db(img: &ImageField) -> Result<ImageField> {
    if img.db {
        return Ok(img.clone());
    }
    let top = img.max();
    if !(top > 0.0) {
        return Err(Error::AllZeroImage);
    }
    Ok(ImageField {
        values: img.values.iter().map(|v| 10.0 * (v / top).log10()).collect(),
        db: true,
        ..img.clone()
    })
}

pub fn threshold_support(img_db: &ImageField, level_db: f64) -> Vec<bool> {
    img_db.values.iter().map(|&v| v >= level_db).collect()
}

/// Connected components under 4-connectivity, each as a sorted cell list.
pub fn blobs(grid: &Grid2D, mask: &[bool]) -> Vec<Vec<usize>> {
    let mut label = vec![usize::MAX; mask.len()];
    let mut out: Vec<Vec<usize>> = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut cells = Vec::new();
        let mut stack = vec![start];
        label[start] = id;
        while let Some(n) = stack.pop() {
            cells.push(n);
            let (ix, iy) = grid.unflatten(n);
            let mut nb = Vec::with_capacity(4);
            if ix > 0 {
                nb.push(grid.flatten(ix - 1, iy));
            }
            if ix + 1 < grid.nx {
                nb.push(grid.flatten(ix + 1, iy));
            }
            if iy > 0 {
                nb.push(grid.flatten(ix, iy - 1));
            }
            if iy + 1 < grid.ny {
                nb.push(grid.flatten(ix, iy + 1));
            }
            for m in nb {
                if mask[m] && label[m] == usize::MAX {
                    label[m] = id;
                    stack.push(m);
                }
            }
        }
        cells.sort_unstable();
        out.push(cells);
    }
    out
}

fn centroid(grid: &Grid2D, cells: &[usize]) -> Point {
    let (mut x, mut y) = (0.0, 0.0);
    for &n in cells {
        let c = grid.center(n);
        x += c.x;
        y += c.y;
    }
    let k = cells.len() as f64;
    Point::new(x / k, y / k)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlobReport {
    pub cells: usize,
    pub centroid: [f64; 2],
    /// Distance to the nearest truth-blob centroid, in meters.
    pub centroid_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportMetrics {
    pub jaccard: f64,
    pub blobs: Vec<BlobReport>,
    pub truth_blobs: usize,
    /// Highest level outside the dilated truth, clamped to [`METRIC_FLOOR_DB`].
    pub peak_sidelobe_db: f64,
    /// Mean clamped level outside the dilated truth.
    pub mean_exterior_db: f64,
}

pub fn jaccard(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Cells within `radius` of some cell of `mask` (centre to centre).
pub fn dilate(grid: &Grid2D, mask: &[bool], radius: f64) -> Vec<bool> {
    let r = (radius / grid.delta).floor() as isize;
    let mut out = mask.to_vec();
    for n in (0..mask.len()).filter(|&n| mask[n]) {
        let (ix, iy) = grid.unflatten(n);
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (ix as isize + dx, iy as isize + dy);
                if x < 0 || y < 0 || x >= grid.nx as isize || y >= grid.ny as isize {
                    continue;
                }
                if ((dx * dx + dy * dy) as f64).sqrt() * grid.delta <= radius * (1.0 + 1e-12) {
                    out[grid.flatten(x as usize, y as usize)] = true;
                }
            }
        }
    }
    out
}

/// Overlap, blob centroids and exterior levels of a thresholded image
/// against the true scene. Sidelobes are measured outside the truth dilated
/// by `dilation` meters.
pub fn support_metrics(mask: &[bool], truth: &ContrastMap, img_db: &ImageField, dilation: f64) -> Result<SupportMetrics> {
    let grid = truth.grid();
    if !img_db.grid.same_as(grid) || mask.len() != grid.len() {
        return Err(Error::GridMismatch("mask, truth and image must share one grid".into()));
    }
    if !img_db.db {
        return Err(Error::InvalidArgument("support metrics need a dB image".into()));
    }
    let t = truth.support();
    let truth_centroids: Vec<Point> = blobs(grid, &t).iter().map(|b| centroid(grid, b)).collect();
    let reports = blobs(grid, mask)
        .iter()
        .map(|b| {
            let c = centroid(grid, b);
            let err = truth_centroids.iter().map(|t| t.distance(&c)).fold(f64::INFINITY, f64::min);
            BlobReport {
                cells: b.len(),
                centroid: [c.x, c.y],
                centroid_error: err,
            }
        })
        .collect();
    let near = dilate(grid, &t, dilation);
    let exterior: Vec<f64> = img_db
        .values
        .iter()
        .zip(&near)
        .filter(|(_, n)| !**n)
        .map(|(v, _)| v.max(METRIC_FLOOR_DB))
        .collect();
    let (peak, mean) = if exterior.is_empty() {
        (METRIC_FLOOR_DB, METRIC_FLOOR_DB)
    } else {
        (
            exterior.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            exterior.iter().sum::<f64>() / exterior.len() as f64,
        )
    };
    Ok(SupportMetrics {
        jaccard: jaccard(mask, &t),
        blobs: reports,
        truth_blobs: truth_centroids.len(),
        peak_sidelobe_db: peak,
        mean_exterior_db: mean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    CsvGrid,
    Pgm8,
}

/// CSV text: a header line `nx,ny,delta,x0,y0`, then `ny` rows of `nx`
/// values with the row of smallest `y` first.
pub fn csv_grid_string(img: &ImageField) -> String {
    let g = &img.grid;
    let mut s = format!("{},{},{:e},{:e},{:e}\n", g.nx, g.ny, g.delta, g.x0, g.y0);
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            if ix > 0 {
                s.push(',');
            }
            write!(s, "{:e}", img.values[g.flatten(ix, iy)]).expect("writing to a string");
        }
        s.push('\n');
    }
    s
}

/// Reads back a [`csv_grid_string`] document as `(grid, values)`.
pub fn parse_csv_grid(text: &str) -> Result<(Grid2D, Vec<f64>)> {
    let bad = |line: usize, reason: &str| Error::CorruptRecord {
        line,
        reason: reason.to_string(),
    };
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next().ok_or_else(|| bad(1, "empty file"))?.split(',').collect();
    if head.len() != 5 {
        return Err(bad(1, "header needs nx,ny,delta,x0,y0"));
    }
    let nx: usize = head[0].parse().map_err(|_| bad(1, "nx"))?;
    let ny: usize = head[1].parse().map_err(|_| bad(1, "ny"))?;
    let f = |k: usize| head[k].parse::<f64>().map_err(|_| bad(1, "number"));
    let grid = Grid2D::new(f(3)?, f(4)?, f(2)?, nx, ny)?;
    let mut values = vec![0.0; grid.len()];
    for iy in 0..ny {
        let line = lines.next().ok_or_else(|| bad(iy + 2, "missing row"))?;
        let row: Vec<&str> = line.split(',').collect();
        if row.len() != nx {
            return Err(bad(iy + 2, "wrong number of columns"));
        }
        for (ix, v) in row.iter().enumerate() {
            values[grid.flatten(ix, iy)] = v.trim().parse().map_err(|_| bad(iy + 2, "number"))?;
        }
    }
    Ok((grid, values))
}

/// Binary greyscale PGM mapping `[floor_db, 0]` dB linearly onto `[0, 255]`,
/// top row = largest `y`.
pub fn pgm8_bytes(img: &ImageField, floor_db: f64) -> Result<Vec<u8>> {
    let db = to_db(img)?;
    let g = &db.grid;
    let mut out = format!("P5\n{} {}\n255\n", g.nx, g.ny).into_bytes();
    for iy in (0..g.ny).rev() {
        for ix in 0..g.nx {
            let v = db.values[g.flatten(ix, iy)];
            let t = ((v - floor_db) / -floor_db).clamp(0.0, 1.0);
            out.push((t * 255.0).round() as u8);
        }
    }
    Ok(out)
}

pub fn export_field(img: &ImageField, path: impl AsRef<Path>, format: ExportFormat) -> Result<()> {
    let bytes = match format {
        ExportFormat::CsvGrid => csv_grid_string(img).into_bytes(),
        ExportFormat::Pgm8 => pgm8_bytes(img, DISPLAY_FLOOR_DB)?,
    };
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests;
