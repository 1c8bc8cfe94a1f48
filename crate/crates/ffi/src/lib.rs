//! C interface to the `gmmv` library.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free`. Every fallible call returns a
//! [`GmmvStatus`]; the message of the most recent failure on the calling
//! thread is available from [`gmmv_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use gmmv::dataio::{add_noise, read_dataset, write_dataset};
use gmmv::dataset::ScatterDataset;
use gmmv::error::Error;
use gmmv::imaging::ImageField;
use gmmv::model::presets::preset;
use gmmv::model::{load_config, parse_config, ExperimentConfig};
use gmmv::pipeline::{adjoint_mismatch, build_operator, invert_gmmv, invert_lsm, simulate, OperatorRoute};
use gmmv::sensing::SensingOperator;
use gmmv::solver::InversionResult;

/// Outcome of a call. The finer-grained library code is part of the
/// last-error message.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GmmvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidString = 2,
    Config = 3,
    Io = 4,
    DataFormat = 5,
    InvalidArgument = 6,
    Solver = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GmmvOperatorRoute {
    Greens = 0,
    Fdfd = 1,
}

/// Validated experiment configuration.
pub struct GmmvConfig(ExperimentConfig);

/// Scattered-field measurements.
pub struct GmmvDataset(ScatterDataset);

/// Discretized sensing kernels for one grid, geometry and frequency set.
pub struct GmmvOperator(SensingOperator);

/// Reconstructed image, with solver histories for GMMV runs.
pub struct GmmvResult {
    image: ImageField,
    inversion: Option<InversionResult>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GmmvStatus {
    match e.code() {
        "IO_ERROR" => GmmvStatus::Io,
        "PARSE_ERROR" | "VERSION_MISMATCH" | "CORRUPT_RECORD" | "DUPLICATE_TRIPLE" => GmmvStatus::DataFormat,
        "LINESEARCH_FAILED" | "ZERO_RESIDUAL" | "NONNEGATIVE_DERIVATIVE" | "MAX_ITERATIONS" | "NO_CONVERGENCE"
        | "SINGULAR_MATRIX" => GmmvStatus::Solver,
        "INVALID_ARGUMENT" | "DIM_MISMATCH" | "GRID_MISMATCH" | "EMPTY_FREQUENCY" | "SAMPLE_ON_RECEIVER"
        | "ALL_ZERO_IMAGE" | "UNSUPPORTED" | "UNSUPPORTED_NORM" | "NEGATIVE_RADIUS" | "TOO_LARGE_FOR_SPARK" => {
            GmmvStatus::InvalidArgument
        }
        _ => GmmvStatus::Config,
    }
}

struct Fail(GmmvStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), format!("{}: {e}", e.code()))
    }
}

fn null(what: &str) -> Fail {
    Fail(GmmvStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GmmvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GmmvStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            GmmvStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(GmmvStatus::InvalidString, format!("{what} is not valid UTF-8")))
}

unsafe fn obj<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn need<T>(out: *mut T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    Ok(())
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = value;
    Ok(())
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn gmmv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes (without the terminator) of the last error message on
/// this thread, or 0 if there is none.
#[no_mangle]
pub extern "C" fn gmmv_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes().len()))
}

/// Copies the last error message into `buf` (truncated, always
/// nul-terminated when `len > 0`). Returns the full message length.
///
/// # Safety
/// `buf` must be valid for `len` bytes, or null when `len` is 0.
#[no_mangle]
pub unsafe extern "C" fn gmmv_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[][..], |c| c.as_bytes());
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Loads and validates a JSON configuration file.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gmmv_config_from_file(path: *const c_char, out: *mut *mut GmmvConfig) -> GmmvStatus {
    guard(|| {
        need(out)?;
        let path = str_arg(path, "path")?;
        put(out, GmmvConfig(load_config(path)?))
    })
}

/// Parses and validates a JSON configuration document.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gmmv_config_from_json(json: *const c_char, out: *mut *mut GmmvConfig) -> GmmvStatus {
    guard(|| {
        need(out)?;
        let text = str_arg(json, "json")?;
        put(out, GmmvConfig(parse_config(text)?))
    })
}

/// Named scenario, e.g. `two-cylinders`.
///
/// # Safety
/// `name` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gmmv_config_preset(name: *const c_char, out: *mut *mut GmmvConfig) -> GmmvStatus {
    guard(|| {
        need(out)?;
        let name = str_arg(name, "name")?;
        put(out, GmmvConfig(preset(name)?.validate()?))
    })
}

/// Inversion grid size.
///
/// # Safety
/// `cfg` must come from a `gmmv_config_*` constructor; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn gmmv_config_grid_shape(cfg: *const GmmvConfig, nx: *mut usize, ny: *mut usize) -> GmmvStatus {
    guard(|| {
        let cfg = obj(cfg, "config")?;
        write(nx, cfg.0.grid.nx)?;
        write(ny, cfg.0.grid.ny)
    })
}

/// # Safety
/// `cfg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gmmv_config_free(cfg: *mut GmmvConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Synthesizes measurements for the configured scene. `snr_db` may be
/// `INFINITY` for clean data.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gmmv_simulate(
    cfg: *const GmmvConfig,
    snr_db: f64,
    seed: u64,
    out: *mut *mut GmmvDataset,
) -> GmmvStatus {
    guard(|| {
        need(out)?;
        let cfg = obj(cfg, "config")?;
        let clean = simulate(&cfg.0)?;
        put(out, GmmvDataset(add_noise(&clean, snr_db, seed)?))
    })
}

/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gmmv_dataset_read(path: *const c_char, out: *mut *mut GmmvDataset) -> GmmvStatus {
    guard(|| {
        need(out)?;
        let path = str_arg(path, "path")?;
        put(out, GmmvDataset(read_dataset(PathBuf::from(path))?))
    })
}

/// # Safety
/// `ds` must be a live handle; `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gmmv_dataset_write(ds: *const GmmvDataset, path: *const c_char) -> GmmvStatus {
    guard(|| {
        let ds = obj(ds, "dataset")?;
        let path = str_arg(path, "path")?;
        Ok(write_dataset(&ds.0, path)?)
    })
}

/// Number of measured (frequency, source, receiver) triples.
///
/// # Safety
/// `ds` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gmmv_dataset_n_records(ds: *const GmmvDataset, out: *mut usize) -> GmmvStatus {
    guard(|| write(out, obj(ds, "dataset")?.0.n_records()))
}

/// Field value at frequency `i`, source `p`, receiver `q`. Unmeasured
/// pairs read as zero.
///
/// # Safety
/// `ds` must be a live handle; `re` and `im` writable.
#[no_mangle]
pub unsafe extern "C" fn gmmv_dataset_value(
    ds: *const GmmvDataset,
    i: usize,
    p: usize,
    q: usize,
    re: *mut f64,
    im: *mut f64,
) -> GmmvStatus {
    guard(|| {
        let d = &obj(ds, "dataset")?.0;
        let m = d.measurement();
        if i >= d.freqs().len() || p >= m.n_sources() || q >= m.n_receivers() {
            return Err(Fail(GmmvStatus::InvalidArgument, format!("index ({i}, {p}, {q}) out of range")));
        }
        let v = d.value(i, p, q);
        write(re, v.re)?;
        write(im, v.im)
    })
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gmmv_dataset_free(ds: *mut GmmvDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Sensing kernels for the configuration's grid and background, with the
/// geometry and frequencies of `ds`.
///
/// # Safety
/// `cfg` and `ds` must be live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gmmv_operator_build(
    cfg: *const GmmvConfig,
    ds: *const GmmvDataset,
    route: GmmvOperatorRoute,
    out: *mut *mut GmmvOperator,
) -> GmmvStatus {
    guard(|| {
        need(out)?;
        let cfg = &obj(cfg, "config")?.0;
        let ds = &obj(ds, "dataset")?.0;
        let route = match route {
            GmmvOperatorRoute::Greens => OperatorRoute::Greens,
            GmmvOperatorRoute::Fdfd => OperatorRoute::Fdfd(1),
        };
        let op = build_operator(&cfg.grid, ds.measurement(), ds.freqs(), &cfg.background, &cfg.simulation, route)?;
        put(out, GmmvOperator(op))
    })
}

/// Relative mismatch of the inner-product identity between the forward
/// map and its adjoint on random inputs.
///
/// # Safety
/// `op` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gmmv_operator_adjoint_mismatch(op: *const GmmvOperator, seed: u64, out: *mut f64) -> GmmvStatus {
    guard(|| write(out, adjoint_mismatch(&obj(op, "operator")?.0, seed)?))
}

/// # Safety
/// `op` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gmmv_operator_free(op: *mut GmmvOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Joint-sparse inversion with the configuration's solver settings.
/// Pass `NAN` as `sigma` to stop by cross validation (the dataset must
/// hold a CV split); otherwise the residual target in data units.
///
/// # Safety
/// All handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gmmv_invert(
    cfg: *const GmmvConfig,
    op: *const GmmvOperator,
    ds: *const GmmvDataset,
    sigma: f64,
    out: *mut *mut GmmvResult,
) -> GmmvStatus {
    guard(|| {
        need(out)?;
        let cfg = &obj(cfg, "config")?.0;
        let op = &obj(op, "operator")?.0;
        let ds = &obj(ds, "dataset")?.0;
        let sigma = (!sigma.is_nan()).then_some(sigma);
        let run = invert_gmmv(op, ds, &cfg.solver, sigma)?;
        put(
            out,
            GmmvResult {
                image: run.image,
                inversion: Some(run.result),
            },
        )
    })
}

/// Linear-sampling indicator image on the configuration's grid.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gmmv_invert_lsm(
    cfg: *const GmmvConfig,
    ds: *const GmmvDataset,
    out: *mut *mut GmmvResult,
) -> GmmvStatus {
    guard(|| {
        need(out)?;
        let cfg = &obj(cfg, "config")?.0;
        let ds = &obj(ds, "dataset")?.0;
        let (image, _) = invert_lsm(ds, &cfg.grid, &cfg.background)?;
        put(out, GmmvResult { image, inversion: None })
    })
}

/// Image size; values are row-major with `n = iy * nx + ix`.
///
/// # Safety
/// `res` must be a live handle; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn gmmv_result_shape(res: *const GmmvResult, nx: *mut usize, ny: *mut usize) -> GmmvStatus {
    guard(|| {
        let g = obj(res, "result")?.image.grid;
        write(nx, g.nx)?;
        write(ny, g.ny)
    })
}

/// Copies the linear image into `values`, which must hold `nx * ny`
/// entries.
///
/// # Safety
/// `res` must be a live handle; `values` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gmmv_result_image(res: *const GmmvResult, values: *mut f64, len: usize) -> GmmvStatus {
    guard(|| {
        let img = &obj(res, "result")?.image;
        if values.is_null() {
            return Err(null("values"));
        }
        if len != img.values.len() {
            return Err(Fail(
                GmmvStatus::InvalidArgument,
                format!("buffer holds {len} values, image has {}", img.values.len()),
            ));
        }
        ptr::copy_nonoverlapping(img.values.as_ptr(), values, len);
        Ok(())
    })
}

fn inversion(res: &GmmvResult) -> Result<&InversionResult, Fail> {
    res.inversion
        .as_ref()
        .ok_or_else(|| Fail(GmmvStatus::InvalidArgument, "result carries no solver history".into()))
}

/// Number of inner iterations run; the residual histories have one more
/// entry (the starting point).
///
/// # Safety
/// `res` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gmmv_result_iterations(res: *const GmmvResult, out: *mut usize) -> GmmvStatus {
    guard(|| write(out, inversion(obj(res, "result")?)?.n_iter))
}

/// Copies the reconstruction and CV residual histories. Either buffer may
/// be null; non-null buffers must hold `iterations + 1` entries.
///
/// # Safety
/// `res` must be a live handle; buffers valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gmmv_result_residuals(
    res: *const GmmvResult,
    r_rec: *mut f64,
    r_cv: *mut f64,
    len: usize,
) -> GmmvStatus {
    guard(|| {
        let inv = inversion(obj(res, "result")?)?;
        if len != inv.r_rec.len() {
            return Err(Fail(
                GmmvStatus::InvalidArgument,
                format!("buffers hold {len} values, history has {}", inv.r_rec.len()),
            ));
        }
        if !r_rec.is_null() {
            ptr::copy_nonoverlapping(inv.r_rec.as_ptr(), r_rec, len);
        }
        if !r_cv.is_null() {
            ptr::copy_nonoverlapping(inv.r_cv.as_ptr(), r_cv, len);
        }
        Ok(())
    })
}

/// Noise estimate at the CV minimum, or `NAN` for a fixed-target solve.
///
/// # Safety
/// `res` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gmmv_result_sigma_hat(res: *const GmmvResult, out: *mut f64) -> GmmvStatus {
    guard(|| write(out, inversion(obj(res, "result")?)?.sigma_hat.unwrap_or(f64::NAN)))
}

/// # Safety
/// `res` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gmmv_result_free(res: *mut GmmvResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}
