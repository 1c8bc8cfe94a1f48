//! Cell-centred square grids with row-major flattening.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn polar(radius: f64, angle_deg: f64) -> Self {
        let a = angle_deg.to_radians();
        Self::new(radius * a.cos(), radius * a.sin())
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }

    /// Polar angle in degrees, in `[0, 360)`.
    pub fn angle_deg(&self) -> f64 {
        self.y.atan2(self.x).to_degrees().rem_euclid(360.0)
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Uniform grid of `nx * ny` square cells of side `delta`.
///
/// Cell `(ix, iy)` has its centre at `(x0 + (ix + 1/2) delta, y0 + (iy + 1/2) delta)`
/// and flattened index `iy * nx + ix`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub x0: f64,
    pub y0: f64,
    pub delta: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2D {
    pub fn new(x0: f64, y0: f64, delta: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grid spacing must be positive, got {delta}"
            )));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid must have at least one cell per axis, got {nx}x{ny}"
            )));
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return Err(Error::InvalidArgument("grid origin must be finite".into()));
        }
        Ok(Self {
            x0,
            y0,
            delta,
            nx,
            ny,
        })
    }

    /// Grid covering `[x_min, x_max] x [y_min, y_max]` with spacing `delta`.
    ///
    /// Cell counts are rounded to the nearest integer and the grid is centred
    /// on the requested box, so a non-commensurate extent is covered symmetrically.
    pub fn from_bounds(x_min: f64, x_max: f64, y_min: f64, y_max: f64, delta: f64) -> Result<Self> {
        if !(x_max > x_min && y_max > y_min) {
            return Err(Error::InvalidArgument("grid bounds are empty".into()));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grid spacing must be positive, got {delta}"
            )));
        }
        let nx = (((x_max - x_min) / delta).round() as usize).max(1);
        let ny = (((y_max - y_min) / delta).round() as usize).max(1);
        let cx = 0.5 * (x_min + x_max);
        let cy = 0.5 * (y_min + y_max);
        Self::new(
            cx - 0.5 * nx as f64 * delta,
            cy - 0.5 * ny as f64 * delta,
            delta,
            nx,
            ny,
        )
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn flatten(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.nx && iy < self.ny);
        iy * self.nx + ix
    }

    #[inline]
    pub fn unflatten(&self, n: usize) -> (usize, usize) {
        debug_assert!(n < self.len());
        (n % self.nx, n / self.nx)
    }

    #[inline]
    pub fn cell_center(&self, ix: usize, iy: usize) -> Point {
        Point::new(
            self.x0 + (ix as f64 + 0.5) * self.delta,
            self.y0 + (iy as f64 + 0.5) * self.delta,
        )
    }

    #[inline]
    pub fn center(&self, n: usize) -> Point {
        let (ix, iy) = self.unflatten(n);
        self.cell_center(ix, iy)
    }

    pub fn centers(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(move |n| self.center(n))
    }

    pub fn cell_area(&self) -> f64 {
        self.delta * self.delta
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.nx as f64 * self.delta
    }

    pub fn y_max(&self) -> f64 {
        self.y0 + self.ny as f64 * self.delta
    }

    pub fn midpoint(&self) -> Point {
        Point::new(0.5 * (self.x0 + self.x_max()), 0.5 * (self.y0 + self.y_max()))
    }

    /// True if `p` lies in the closed bounding box of the grid.
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.x0 && p.x <= self.x_max() && p.y >= self.y0 && p.y <= self.y_max()
    }

    /// Cell containing `p`, if any.
    pub fn locate(&self, p: &Point) -> Option<(usize, usize)> {
        if !self.contains(p) {
            return None;
        }
        let ix = (((p.x - self.x0) / self.delta).floor() as usize).min(self.nx - 1);
        let iy = (((p.y - self.y0) / self.delta).floor() as usize).min(self.ny - 1);
        Some((ix, iy))
    }

    pub fn same_as(&self, other: &Grid2D) -> bool {
        let tol = 1e-9 * self.delta;
        self.nx == other.nx
            && self.ny == other.ny
            && (self.delta - other.delta).abs() <= tol
            && (self.x0 - other.x0).abs() <= tol
            && (self.y0 - other.y0).abs() <= tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bounds_give_reference_grid() {
        let g = Grid2D::from_bounds(-0.075, 0.075, -0.075, 0.075, 0.0025).unwrap();
        assert_eq!((g.nx, g.ny, g.len()), (60, 60, 3600));
        let c = g.center(0);
        assert!((c.x + 0.07375).abs() < 1e-12 && (c.y + 0.07375).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_spacing() {
        assert!(Grid2D::new(0.0, 0.0, -1.0, 2, 2).is_err());
        assert!(Grid2D::new(0.0, 0.0, 1.0, 0, 2).is_err());
    }

    #[test]
    fn locate_matches_centers() {
        let g = Grid2D::new(-1.0, -2.0, 0.5, 4, 6).unwrap();
        for n in 0..g.len() {
            let (ix, iy) = g.locate(&g.center(n)).unwrap();
            assert_eq!(g.flatten(ix, iy), n);
        }
        assert!(g.locate(&Point::new(5.0, 0.0)).is_none());
    }

    proptest! {
        #[test]
        fn flatten_round_trip(nx in 1usize..50, ny in 1usize..50, seed in 0usize..10_000) {
            let g = Grid2D::new(0.0, 0.0, 1.0, nx, ny).unwrap();
            let n = seed % g.len();
            let (ix, iy) = g.unflatten(n);
            prop_assert_eq!(g.flatten(ix, iy), n);
        }
    }
}
