//! End-to-end building blocks shared by the command line, the C interface
//! and the acceptance suite.

use std::path::Path;
use std::time::Instant;

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::ScatterDataset;
use crate::error::{Error, Result};
use crate::fdfd::{mie_reference, simulate_scene, Cylinder, Illumination};
use crate::imaging::{gmmv_image, support_metrics, threshold_support, to_db, ImageField, SupportMetrics, METRIC_LEVEL_DB};
use crate::lsm::lsm_image;
use crate::model::{
    check_grid_rule, rasterize_scene, rasterize_scene_averaged, ring, BackgroundModel, ContrastMap, ExperimentConfig,
    FrequencySet, Grid2D, Material, MeasurementConfig, Point, SceneSpec, Shape, SimulationSettings,
};
use crate::sensing::{
    background_factorizations, build_sensing_fdfd, build_sensing_greens, cache_key, load_kernels, save_kernels,
    SensingOperator,
};
use crate::solver::{solve_gmmv_cv, solve_gmmv_sigma, InversionResult, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorRoute {
    /// Closed-form homogeneous-background kernels.
    Greens,
    /// Background FDFD solves, one per receiver, with this many (odd)
    /// FDFD cells per inversion cell side.
    Fdfd(usize),
}

impl OperatorRoute {
    pub fn tag(self) -> String {
        match self {
            OperatorRoute::Greens => "greens".into(),
            OperatorRoute::Fdfd(r) => format!("fdfd/{r}"),
        }
    }
}

pub fn build_operator(
    grid: &Grid2D,
    measurement: &MeasurementConfig,
    freqs: &FrequencySet,
    background: &BackgroundModel,
    settings: &SimulationSettings,
    route: OperatorRoute,
) -> Result<SensingOperator> {
    match route {
        OperatorRoute::Greens => build_sensing_greens(grid, measurement, freqs, background),
        OperatorRoute::Fdfd(r) => {
            let facts = background_factorizations(grid, background, freqs, settings, r)?;
            build_sensing_fdfd(&facts, grid, measurement, freqs, background)
        }
    }
}

/// Like [`build_operator`], but reuses kernels from `cache` when its key
/// matches. A cache built for other inputs is ignored; a damaged one is an
/// error.
pub fn cached_operator(
    grid: &Grid2D,
    measurement: &MeasurementConfig,
    freqs: &FrequencySet,
    background: &BackgroundModel,
    settings: &SimulationSettings,
    route: OperatorRoute,
    cache: &Path,
) -> Result<(SensingOperator, bool)> {
    let key = cache_key(grid, measurement.receivers(), freqs, background, &route.tag());
    if cache.exists() {
        if let Some(kernels) = load_kernels(cache, &key)? {
            return Ok((SensingOperator::new(*grid, freqs.clone(), measurement.clone(), kernels)?, true));
        }
    }
    Ok((build_operator(grid, measurement, freqs, background, settings, route)?, false))
}

pub fn save_operator(op: &SensingOperator, background: &BackgroundModel, route: OperatorRoute, path: &Path) -> Result<()> {
    let key = cache_key(op.grid(), op.measurement().receivers(), op.freqs(), background, &route.tag());
    save_kernels(path, &key, op.kernels())
}

/// Synthetic data for a configuration, on the refined simulation grid.
pub fn simulate(cfg: &ExperimentConfig) -> Result<ScatterDataset> {
    crate::fdfd::simulate_experiment(cfg)
}

/// True scene on the inversion grid (cell-centre rasterization).
pub fn truth_map(cfg: &ExperimentConfig) -> Result<ContrastMap> {
    rasterize_scene(&cfg.scene, &cfg.grid, cfg.background)
}

#[derive(Debug, Clone)]
pub struct GmmvRun {
    pub result: InversionResult,
    pub image: ImageField,
    pub seconds: f64,
}

/// Cross-validated inversion when the data carry a CV split, otherwise a
/// solve for the residual target `sigma` (which must then be given).
pub fn invert_gmmv(
    op: &SensingOperator,
    data: &ScatterDataset,
    opts: &SolverOptions,
    sigma: Option<f64>,
) -> Result<GmmvRun> {
    let t = Instant::now();
    let result = match sigma {
        Some(s) => solve_gmmv_sigma(op, data, s, opts)?,
        None => solve_gmmv_cv(op, data, opts)?,
    };
    let image = gmmv_image(op.grid(), result.j.as_ref())?;
    Ok(GmmvRun {
        result,
        image,
        seconds: t.elapsed().as_secs_f64(),
    })
}

pub fn invert_lsm(data: &ScatterDataset, grid: &Grid2D, background: &BackgroundModel) -> Result<(ImageField, f64)> {
    let t = Instant::now();
    let img = lsm_image(data, grid, background)?;
    Ok((img, t.elapsed().as_secs_f64()))
}

/// Support metrics at the default threshold, with the truth dilated by half
/// the shortest wavelength.
pub fn image_metrics(img: &ImageField, truth: &ContrastMap, freqs: &FrequencySet) -> Result<SupportMetrics> {
    let db = to_db(img)?;
    let mask = threshold_support(&db, METRIC_LEVEL_DB);
    support_metrics(&mask, truth, &db, freqs.min_wavelength() / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

impl Check {
    fn at_most(name: &str, value: f64, limit: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass: value <= limit,
            value,
            limit,
            detail: detail.into(),
        }
    }

    fn failed(name: &str, limit: f64, e: &Error) -> Self {
        Self {
            name: name.into(),
            pass: false,
            value: f64::NAN,
            limit,
            detail: format!("{}: {e}", e.code()),
        }
    }
}

pub const ADJOINT_TOLERANCE: f64 = 1e-10;
pub const OPERATOR_AGREEMENT_TOLERANCE: f64 = 0.05;
pub const MIE_TOLERANCE: f64 = 0.03;

/// `|<Phi J, R> - <J, Phi^H R>| / |<Phi J, R>|` for random `J` and `R`.
pub fn adjoint_mismatch(op: &SensingOperator, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let j = Mat::from_fn(op.n_cells(), op.n_columns(), |_, _| draw());
    let (nq, np) = (op.measurement().n_receivers(), op.measurement().n_sources());
    let r: Vec<Mat<c64>> = (0..op.freqs().len()).map(|_| Mat::from_fn(nq, np, |_, _| draw())).collect();
    let sel = crate::model::RowSelection::All;
    let y = op.apply_forward(j.as_ref(), sel)?;
    let g = op.apply_adjoint(&r, sel)?;
    let mut lhs = c64::new(0.0, 0.0);
    for (a, b) in y.iter().zip(&r) {
        for p in 0..np {
            for q in 0..nq {
                lhs += a[(q, p)].conj() * b[(q, p)];
            }
        }
    }
    let mut rhs = c64::new(0.0, 0.0);
    for c in 0..j.ncols() {
        for n in 0..j.nrows() {
            rhs += j[(n, c)].conj() * g[(n, c)];
        }
    }
    Ok((lhs - rhs).norm() / lhs.norm())
}

/// Largest relative column difference `||a_n - b_n|| / ||b_n||` over all
/// measured submatrices.
pub fn operator_disagreement(a: &SensingOperator, b: &SensingOperator) -> Result<f64> {
    if a.kernels().len() != b.kernels().len() || a.n_cells() != b.n_cells() {
        return Err(Error::DimMismatch("operators differ in shape".into()));
    }
    let mut worst: f64 = 0.0;
    for i in 0..a.freqs().len() {
        for p in 0..a.measurement().n_sources() {
            let (x, y) = (a.phi(p, i), b.phi(p, i));
            for n in 0..x.ncols() {
                worst = worst.max((x.col(n) - y.col(n)).norm_l2() / y.col(n).norm_l2());
            }
        }
    }
    Ok(worst)
}

/// Relative L2 error of the simulated scattered field of a 15 mm, `eps_r = 3`
/// cylinder against the series solution, on a `delta` grid at `freq_hz`.
/// Four line sources at 0.72 m, 72 receivers at 0.76 m.
pub fn mie_error(freq_hz: f64, delta: f64, settings: &SimulationSettings) -> Result<f64> {
    let bg = BackgroundModel::free_space();
    let half = 0.075 + delta * 1e-3;
    let grid = Grid2D::from_bounds(-half, half, -half, half, delta)?;
    let radius = 0.015;
    let mut scene = SceneSpec::default();
    scene.push(
        Shape::Circle {
            center: Point::new(0.0, 0.0),
            radius,
        },
        Material::dielectric(3.0),
    );
    let contrast = rasterize_scene_averaged(&scene, &grid, bg, 8)?;
    let m = MeasurementConfig::full(ring(0.72, 4, 0.0, 90.0), ring(0.76, 72, 0.0, 5.0))?;
    let freqs = FrequencySet::new(vec![freq_hz])?;
    let ds = simulate_scene(&contrast, &m, &freqs, settings)?;
    let cyl = Cylinder {
        center: Point::new(0.0, 0.0),
        radius,
        eps_r: 3.0,
    };
    let (mut num, mut den) = (0.0, 0.0);
    for p in 0..m.n_sources() {
        let mie = mie_reference(&cyl, &bg, freq_hz, Illumination::LineSource(m.sources()[p]), m.receivers())?;
        for (q, v) in mie.iter().enumerate() {
            num += (ds.value(0, p, q) - v).norm_sqr();
            den += v.norm_sqr();
        }
    }
    Ok((num / den).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Grid rule, adjoint identity (on the cached operator if `cache` is
/// given), Green's-function vs FDFD kernels, and the cylinder series check
/// at the highest configured frequency.
pub fn validate_config(cfg: &ExperimentConfig, cache: Option<&Path>) -> ValidationReport {
    let mut checks = Vec::new();
    let rule = check_grid_rule(&cfg.grid, &cfg.frequencies);
    checks.push(Check {
        name: "grid_rule".into(),
        pass: rule.pass,
        value: rule.delta,
        limit: rule.delta_max,
        detail: "cell size against the shortest wavelength / 15".into(),
    });

    let settings = cfg.simulation;
    let build = |route| build_operator(&cfg.grid, &cfg.measurement, &cfg.frequencies, &cfg.background, &settings, route);
    let greens = build(OperatorRoute::Greens);
    let adjoint = match cache {
        Some(path) => cached_operator(
            &cfg.grid,
            &cfg.measurement,
            &cfg.frequencies,
            &cfg.background,
            &settings,
            OperatorRoute::Greens,
            path,
        )
        .and_then(|(op, _)| adjoint_mismatch(&op, 7)),
        None => match &greens {
            Ok(op) => adjoint_mismatch(op, 7),
            Err(e) => Err(Error::InvalidArgument(format!("operator build failed: {e}"))),
        },
    };
    checks.push(match adjoint {
        Ok(v) => Check::at_most("adjoint_identity", v, ADJOINT_TOLERANCE, "relative inner-product mismatch"),
        Err(e) => Check::failed("adjoint_identity", ADJOINT_TOLERANCE, &e),
    });

    let agreement = greens.and_then(|g| {
        let f = build(OperatorRoute::Fdfd(1))?;
        operator_disagreement(&f, &g)
    });
    checks.push(match agreement {
        Ok(v) => Check::at_most(
            "greens_vs_fdfd",
            v,
            OPERATOR_AGREEMENT_TOLERANCE,
            "worst relative column difference",
        ),
        Err(e) => Check::failed("greens_vs_fdfd", OPERATOR_AGREEMENT_TOLERANCE, &e),
    });

    let f_max = *cfg.frequencies.hz().last().expect("at least one frequency");
    checks.push(match mie_error(f_max, cfg.grid.delta, &settings) {
        Ok(v) => Check::at_most(
            "cylinder_series",
            v,
            MIE_TOLERANCE,
            format!("relative L2 error at {:.3} GHz", f_max / 1e9),
        ),
        Err(e) => Check::failed("cylinder_series", MIE_TOLERANCE, &e),
    });
    ValidationReport { checks }
}
