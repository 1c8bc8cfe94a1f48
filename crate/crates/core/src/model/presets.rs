//! Named synthetic scenarios modelled on the classic free-space
//! multi-frequency bistatic measurement campaigns.
//!
//! Grid bounds, spacings, frequencies and ring geometries match the
//! reference setups. Where only a target's size is known, its placement is
//! a guess.

use super::config::{
    BackgroundSection, ConfigFile, CvSection, GridSection, ReceiverSection, RingSpec, SourceSection,
};
use super::grid::Point;
use super::measurement::CvStrategy;
use super::scene::{Material, SceneItem, SceneSpec, Shape};
use crate::error::{Error, Result};

pub const PRESET_NAMES: [&str; 5] = [
    "two-cylinders",
    "foam-die-int",
    "rect-metal",
    "u-shape",
    "foam-met-ext",
];

const MM: f64 = 1e-3;
const GHZ: f64 = 1e9;

fn grid(x_min: f64, x_max: f64, y_min: f64, y_max: f64, delta: f64) -> GridSection {
    GridSection {
        x_min: Some(x_min * MM),
        x_max: Some(x_max * MM),
        y_min: Some(y_min * MM),
        y_max: Some(y_max * MM),
        delta: Some(delta * MM),
    }
}

fn ring_spec(radius: f64, count: usize, step_deg: f64) -> RingSpec {
    RingSpec {
        radius: Some(radius),
        count: Some(count),
        start_deg: 0.0,
        step_deg: Some(step_deg),
    }
}

/// 36 sources at 0.72 m every 10 degrees, 72 receiver slots at 0.76 m every
/// 5 degrees, of which the 49 within 60..300 degrees of the source are used.
fn ring_2001(cv: usize) -> (SourceSection, ReceiverSection) {
    (
        SourceSection {
            ring: Some(ring_spec(0.72, 36, 10.0)),
            positions: None,
        },
        ReceiverSection {
            ring: Some(ring_spec(0.76, 72, 5.0)),
            positions: None,
            active_arc_deg: Some([60.0, 300.0]),
            active: None,
            cv: Some(CvSection {
                count: cv,
                strategy: CvStrategy::EveryKth,
            }),
        },
    )
}

/// Sources and receivers at 1.67 m, receivers every degree over 60..300.
fn ring_2005(n_sources: usize, cv: usize) -> (SourceSection, ReceiverSection) {
    (
        SourceSection {
            ring: Some(ring_spec(1.67, n_sources, 360.0 / n_sources as f64)),
            positions: None,
        },
        ReceiverSection {
            ring: Some(ring_spec(1.67, 360, 1.0)),
            positions: None,
            active_arc_deg: Some([60.0, 300.0]),
            active: None,
            cv: Some(CvSection {
                count: cv,
                strategy: CvStrategy::EveryKth,
            }),
        },
    )
}

fn circle(x: f64, y: f64, radius: f64, material: Material) -> SceneItem {
    SceneItem {
        shape: Shape::Circle {
            center: Point::new(x * MM, y * MM),
            radius: radius * MM,
        },
        material,
    }
}

fn ghz(list: &[f64]) -> Vec<f64> {
    list.iter().map(|f| f * GHZ).collect()
}

fn assemble(
    name: &str,
    grid: GridSection,
    freqs: Vec<f64>,
    (sources, receivers): (SourceSection, ReceiverSection),
    shapes: Vec<SceneItem>,
) -> ConfigFile {
    ConfigFile {
        name: Some(name.to_string()),
        grid: Some(grid),
        background: Some(BackgroundSection {
            eps_r: Some(1.0),
            sigma: Some(0.0),
        }),
        frequencies: Some(freqs),
        sources: Some(sources),
        receivers: Some(receivers),
        scene: Some(SceneSpec::new(shapes)),
        solver: None,
        simulation: None,
    }
}

/// Configuration document of a named preset.
pub fn preset(name: &str) -> Result<ConfigFile> {
    let cfg = match name {
        "two-cylinders" => assemble(
            name,
            grid(-75.0, 75.0, -75.0, 75.0, 2.5),
            ghz(&[2.0, 4.0, 6.0, 8.0]),
            ring_2001(9),
            vec![
                circle(-45.0, 0.0, 15.0, Material::dielectric(3.0)),
                circle(45.0, 0.0, 15.0, Material::dielectric(3.0)),
            ],
        ),
        "foam-die-int" => assemble(
            name,
            grid(-60.0, 60.0, -60.0, 60.0, 2.5),
            ghz(&[2.0, 4.0, 6.0, 8.0, 10.0]),
            ring_2005(8, 36),
            vec![
                circle(0.0, 0.0, 40.0, Material::dielectric(1.45)),
                circle(-5.0, 0.0, 15.0, Material::dielectric(3.0)),
            ],
        ),
        "rect-metal" => assemble(
            name,
            grid(-25.0, 25.0, 15.0, 65.0, 1.3),
            ghz(&[10.0, 12.0, 14.0, 16.0]),
            ring_2001(9),
            vec![SceneItem {
                shape: Shape::Rectangle {
                    center: Point::new(0.0, 40.0 * MM),
                    width: 24.5 * MM,
                    height: 12.7 * MM,
                    rotation_deg: 0.0,
                },
                material: Material::pec(),
            }],
        ),
        "u-shape" => assemble(
            name,
            grid(-70.0, 70.0, -70.0, 70.0, 1.3),
            ghz(&[4.0, 8.0, 12.0, 16.0]),
            ring_2001(9),
            vec![SceneItem {
                shape: Shape::UProfile {
                    center: Point::new(0.0, 0.0),
                    width: 80.0 * MM,
                    height: 50.0 * MM,
                    slot_width: 68.0 * MM,
                    slot_depth: 44.0 * MM,
                    rotation_deg: 0.0,
                },
                material: Material::pec(),
            }],
        ),
        "foam-met-ext" => assemble(
            name,
            grid(-90.0, 60.0, -75.0, 75.0, 2.5),
            ghz(&[2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]),
            ring_2005(18, 36),
            vec![
                circle(0.0, 0.0, 40.0, Material::dielectric(1.45)),
                circle(-55.0, 0.0, 14.25, Material::pec()),
                circle(-55.0, 0.0, 12.25, Material::dielectric(1.0)),
            ],
        ),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown preset `{other}`; expected one of {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(cfg)
}
