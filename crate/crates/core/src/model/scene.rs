//! Parametric scene descriptions and their rasterization onto grids.

use serde::{Deserialize, Serialize};

use super::contrast::ContrastMap;
use super::grid::{Grid2D, Point};
use super::physics::BackgroundModel;
use crate::error::{Error, Result};

/// Conductivity used for perfectly conducting targets. The skin depth at
/// microwave frequencies is far below any usable cell size.
pub const PEC_CONDUCTIVITY: f64 = 1.0e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    #[serde(default = "one")]
    pub eps_r: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub pec: bool,
}

fn one() -> f64 {
    1.0
}

impl Material {
    pub const fn dielectric(eps_r: f64) -> Self {
        Self {
            eps_r,
            sigma: 0.0,
            pec: false,
        }
    }

    pub const fn pec() -> Self {
        Self {
            eps_r: 1.0,
            sigma: PEC_CONDUCTIVITY,
            pec: true,
        }
    }

    /// Same material as the given background (used to carve holes).
    pub const fn background(bg: BackgroundModel) -> Self {
        Self {
            eps_r: bg.eps_r,
            sigma: bg.sigma,
            pec: false,
        }
    }

    /// Effective `(eps_r, sigma)` pair; PEC maps to the metallic approximation.
    pub fn resolved(&self) -> (f64, f64) {
        if self.pec {
            (1.0, PEC_CONDUCTIVITY)
        } else {
            (self.eps_r, self.sigma)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Circle {
        center: Point,
        radius: f64,
    },
    Rectangle {
        center: Point,
        width: f64,
        height: f64,
        #[serde(default)]
        rotation_deg: f64,
    },
    /// Outer box with a rectangular slot cut from its top edge (in the local
    /// frame, before rotation), leaving a U open towards +y.
    UProfile {
        center: Point,
        width: f64,
        height: f64,
        slot_width: f64,
        slot_depth: f64,
        #[serde(default)]
        rotation_deg: f64,
    },
}

fn to_local(p: &Point, center: &Point, rotation_deg: f64) -> (f64, f64) {
    let (s, c) = (-rotation_deg.to_radians()).sin_cos();
    let dx = p.x - center.x;
    let dy = p.y - center.y;
    (c * dx - s * dy, s * dx + c * dy)
}

impl Shape {
    pub fn contains(&self, p: &Point) -> bool {
        match *self {
            Shape::Circle { center, radius } => p.distance(&center) <= radius,
            Shape::Rectangle {
                center,
                width,
                height,
                rotation_deg,
            } => {
                let (u, v) = to_local(p, &center, rotation_deg);
                u.abs() <= 0.5 * width && v.abs() <= 0.5 * height
            }
            Shape::UProfile {
                center,
                width,
                height,
                slot_width,
                slot_depth,
                rotation_deg,
            } => {
                let (u, v) = to_local(p, &center, rotation_deg);
                let in_box = u.abs() <= 0.5 * width && v.abs() <= 0.5 * height;
                let in_slot = u.abs() < 0.5 * slot_width && v > 0.5 * height - slot_depth;
                in_box && !in_slot
            }
        }
    }

    /// Exact area of the shape.
    pub fn area(&self) -> f64 {
        match *self {
            Shape::Circle { radius, .. } => std::f64::consts::PI * radius * radius,
            Shape::Rectangle { width, height, .. } => width * height,
            Shape::UProfile {
                width,
                height,
                slot_width,
                slot_depth,
                ..
            } => width * height - slot_width.min(width) * slot_depth.min(height),
        }
    }

    /// Axis-aligned bounding box `(x_min, x_max, y_min, y_max)`.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let rotated_box = |c: Point, w: f64, h: f64, rot: f64| {
            let (s, co) = rot.to_radians().sin_cos();
            let hw = 0.5 * (w * co.abs() + h * s.abs());
            let hh = 0.5 * (w * s.abs() + h * co.abs());
            (c.x - hw, c.x + hw, c.y - hh, c.y + hh)
        };
        match *self {
            Shape::Circle { center, radius } => (
                center.x - radius,
                center.x + radius,
                center.y - radius,
                center.y + radius,
            ),
            Shape::Rectangle {
                center,
                width,
                height,
                rotation_deg,
            }
            | Shape::UProfile {
                center,
                width,
                height,
                rotation_deg,
                ..
            } => rotated_box(center, width, height, rotation_deg),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Circle { radius, .. } => radius > 0.0,
            Shape::Rectangle { width, height, .. } => width > 0.0 && height > 0.0,
            Shape::UProfile {
                width,
                height,
                slot_width,
                slot_depth,
                ..
            } => {
                width > 0.0
                    && height > 0.0
                    && slot_width > 0.0
                    && slot_depth > 0.0
                    && slot_width < width
                    && slot_depth < height
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "degenerate shape dimensions: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneItem {
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(flatten)]
    pub material: Material,
}

/// Ordered list of shapes; later shapes overwrite earlier ones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub shapes: Vec<SceneItem>,
}

impl SceneSpec {
    pub fn new(shapes: Vec<SceneItem>) -> Self {
        Self { shapes }
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn push(&mut self, shape: Shape, material: Material) {
        self.shapes.push(SceneItem { shape, material });
    }

    /// Material at `p`, or `None` for background.
    pub fn material_at(&self, p: &Point) -> Option<&Material> {
        self.shapes
            .iter()
            .rev()
            .find(|item| item.shape.contains(p))
            .map(|item| &item.material)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let shift = |c: Point| c.translated(dx, dy);
        let shapes = self
            .shapes
            .iter()
            .map(|item| {
                let shape = match item.shape {
                    Shape::Circle { center, radius } => Shape::Circle {
                        center: shift(center),
                        radius,
                    },
                    Shape::Rectangle {
                        center,
                        width,
                        height,
                        rotation_deg,
                    } => Shape::Rectangle {
                        center: shift(center),
                        width,
                        height,
                        rotation_deg,
                    },
                    Shape::UProfile {
                        center,
                        width,
                        height,
                        slot_width,
                        slot_depth,
                        rotation_deg,
                    } => Shape::UProfile {
                        center: shift(center),
                        width,
                        height,
                        slot_width,
                        slot_depth,
                        rotation_deg,
                    },
                };
                SceneItem {
                    shape,
                    material: item.material,
                }
            })
            .collect();
        Self { shapes }
    }

    fn check_inside(&self, grid: &Grid2D) -> Result<()> {
        let tol = 1e-9 * grid.delta;
        for (i, item) in self.shapes.iter().enumerate() {
            item.shape.validate()?;
            let (x0, x1, y0, y1) = item.shape.bounding_box();
            if x0 < grid.x0 - tol
                || x1 > grid.x_max() + tol
                || y0 < grid.y0 - tol
                || y1 > grid.y_max() + tol
            {
                return Err(Error::ShapeOutOfGrid(i));
            }
        }
        Ok(())
    }
}

/// Assigns each cell the material of the last shape containing its centre.
pub fn rasterize_scene(
    spec: &SceneSpec,
    grid: &Grid2D,
    background: BackgroundModel,
) -> Result<ContrastMap> {
    spec.check_inside(grid)?;
    let mut map = ContrastMap::empty(*grid, background);
    for n in 0..grid.len() {
        if let Some(m) = spec.material_at(&grid.center(n)) {
            let (e, s) = m.resolved();
            map.set(n, e, s);
        }
    }
    Ok(map)
}

/// Area-weighted rasterization: each cell receives the mean permittivity and
/// conductivity of `samples x samples` sub-cell points.
///
/// Used for forward simulation, where smooth material boundaries make the
/// FDFD error converge regularly under refinement.
pub fn rasterize_scene_averaged(
    spec: &SceneSpec,
    grid: &Grid2D,
    background: BackgroundModel,
    samples: usize,
) -> Result<ContrastMap> {
    spec.check_inside(grid)?;
    let samples = samples.max(1);
    let mut map = ContrastMap::empty(*grid, background);
    let h = grid.delta / samples as f64;
    let w = 1.0 / (samples * samples) as f64;
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let corner = Point::new(
                grid.x0 + ix as f64 * grid.delta,
                grid.y0 + iy as f64 * grid.delta,
            );
            let mut hit = false;
            let mut eps = 0.0;
            let mut sig = 0.0;
            for sy in 0..samples {
                for sx in 0..samples {
                    let p = corner.translated((sx as f64 + 0.5) * h, (sy as f64 + 0.5) * h);
                    let (e, s) = match spec.material_at(&p) {
                        Some(m) => {
                            hit = true;
                            m.resolved()
                        }
                        None => (background.eps_r, background.sigma),
                    };
                    eps += e;
                    sig += s;
                }
            }
            if hit {
                map.set(grid.flatten(ix, iy), eps * w, sig * w);
            }
        }
    }
    Ok(map)
}
