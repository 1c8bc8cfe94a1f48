use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use gmmv_ffi::*;

fn small_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/small.json")
}

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    unsafe { gmmv_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string()
}

fn load() -> *mut GmmvConfig {
    let mut cfg = ptr::null_mut();
    let path = cstr(small_config().to_str().unwrap());
    assert_eq!(unsafe { gmmv_config_from_file(path.as_ptr(), &mut cfg) }, GmmvStatus::Ok);
    cfg
}

#[test]
fn errors_carry_status_and_message() {
    let mut cfg = ptr::null_mut();
    let name = cstr("no-such-scene");
    assert_eq!(unsafe { gmmv_config_preset(name.as_ptr(), &mut cfg) }, GmmvStatus::InvalidArgument);
    assert!(cfg.is_null());
    assert!(gmmv_last_error_length() > 0);
    assert!(last_error().contains("no-such-scene"));

    assert_eq!(unsafe { gmmv_config_preset(ptr::null(), &mut cfg) }, GmmvStatus::NullPointer);
    assert_eq!(unsafe { gmmv_config_preset(name.as_ptr(), ptr::null_mut()) }, GmmvStatus::NullPointer);

    let bad = [0xffu8 as std::ffi::c_char, 0];
    assert_eq!(unsafe { gmmv_config_from_json(bad.as_ptr(), &mut cfg) }, GmmvStatus::InvalidString);

    let json = cstr("{\"grid\": 3}");
    assert_eq!(unsafe { gmmv_config_from_json(json.as_ptr(), &mut cfg) }, GmmvStatus::DataFormat);
    let json = cstr("{\"frequencies\": [4e9]}");
    assert_eq!(unsafe { gmmv_config_from_json(json.as_ptr(), &mut cfg) }, GmmvStatus::Config);
    assert!(last_error().contains("MISSING_FIELD"), "{}", last_error());

    let mut ds = ptr::null_mut();
    let missing = cstr("/nonexistent/data.gmmvds");
    assert_eq!(unsafe { gmmv_dataset_read(missing.as_ptr(), &mut ds) }, GmmvStatus::Io);
    assert!(last_error().starts_with("IO_ERROR"));

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.gmmvds");
    std::fs::write(&junk, "GMMVDS/9\n").unwrap();
    let junk = cstr(junk.to_str().unwrap());
    assert_eq!(unsafe { gmmv_dataset_read(junk.as_ptr(), &mut ds) }, GmmvStatus::DataFormat);

    // Truncation keeps the terminator.
    let mut tiny = [1 as std::ffi::c_char; 4];
    let full = unsafe { gmmv_last_error_message(tiny.as_mut_ptr(), tiny.len()) };
    assert!(full > 3);
    assert_eq!(tiny[3], 0);
}

#[test]
fn preset_shape_and_version() {
    let mut cfg = ptr::null_mut();
    let name = cstr("two-cylinders");
    assert_eq!(unsafe { gmmv_config_preset(name.as_ptr(), &mut cfg) }, GmmvStatus::Ok);
    let (mut nx, mut ny) = (0, 0);
    assert_eq!(unsafe { gmmv_config_grid_shape(cfg, &mut nx, &mut ny) }, GmmvStatus::Ok);
    assert_eq!((nx, ny), (60, 60));
    unsafe { gmmv_config_free(cfg) };
    unsafe { gmmv_config_free(ptr::null_mut()) };
    let v = unsafe { CStr::from_ptr(gmmv_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn full_round_through_handles() {
    let cfg = load();
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { gmmv_simulate(cfg, 30.0, 2, &mut ds) }, GmmvStatus::Ok);

    let dir = tempfile::tempdir().unwrap();
    let path = cstr(dir.path().join("d.gmmvds").to_str().unwrap());
    assert_eq!(unsafe { gmmv_dataset_write(ds, path.as_ptr()) }, GmmvStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { gmmv_dataset_read(path.as_ptr(), &mut back) }, GmmvStatus::Ok);
    let (mut n1, mut n2) = (0, 0);
    unsafe {
        gmmv_dataset_n_records(ds, &mut n1);
        gmmv_dataset_n_records(back, &mut n2);
    }
    assert_eq!(n1, n2);
    assert_eq!(n1, 2 * 12 * 36);
    let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
    unsafe {
        gmmv_dataset_value(ds, 1, 3, 7, &mut a, &mut b);
        gmmv_dataset_value(back, 1, 3, 7, &mut c, &mut d);
    }
    assert_eq!((a, b), (c, d));
    assert!(a != 0.0 || b != 0.0);
    assert_eq!(unsafe { gmmv_dataset_value(ds, 2, 0, 0, &mut a, &mut b) }, GmmvStatus::InvalidArgument);

    let mut op = ptr::null_mut();
    assert_eq!(unsafe { gmmv_operator_build(cfg, ds, GmmvOperatorRoute::Greens, &mut op) }, GmmvStatus::Ok);
    let mut mismatch = 1.0;
    assert_eq!(unsafe { gmmv_operator_adjoint_mismatch(op, 3, &mut mismatch) }, GmmvStatus::Ok);
    assert!(mismatch <= 1e-10);

    let mut res = ptr::null_mut();
    assert_eq!(unsafe { gmmv_invert(cfg, op, ds, f64::NAN, &mut res) }, GmmvStatus::Ok, "{}", last_error());
    let (mut nx, mut ny) = (0, 0);
    unsafe { gmmv_result_shape(res, &mut nx, &mut ny) };
    let mut img = vec![0.0; nx * ny];
    assert_eq!(unsafe { gmmv_result_image(res, img.as_mut_ptr(), img.len()) }, GmmvStatus::Ok);
    assert!(img.iter().any(|&v| v > 0.0));
    assert_eq!(unsafe { gmmv_result_image(res, img.as_mut_ptr(), 3) }, GmmvStatus::InvalidArgument);

    let mut iters = 0;
    unsafe { gmmv_result_iterations(res, &mut iters) };
    let mut rec = vec![0.0; iters + 1];
    let mut cv = vec![0.0; iters + 1];
    assert_eq!(unsafe { gmmv_result_residuals(res, rec.as_mut_ptr(), cv.as_mut_ptr(), iters + 1) }, GmmvStatus::Ok);
    assert!(rec[iters] < rec[0]);
    let mut sigma = f64::NAN;
    unsafe { gmmv_result_sigma_hat(res, &mut sigma) };
    assert!(sigma > 0.0);

    let mut lsm = ptr::null_mut();
    assert_eq!(unsafe { gmmv_invert_lsm(cfg, ds, &mut lsm) }, GmmvStatus::Ok);
    assert_eq!(unsafe { gmmv_result_iterations(lsm, &mut iters) }, GmmvStatus::InvalidArgument);

    unsafe {
        gmmv_result_free(lsm);
        gmmv_result_free(res);
        gmmv_operator_free(op);
        gmmv_dataset_free(back);
        gmmv_dataset_free(ds);
        gmmv_config_free(cfg);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/gmmv.h")).unwrap();
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|s| s.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}

/// Compiles a C program against the generated header and the shared
/// library. Skipped when no C compiler is installed.
#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let libdir = deps.parent().unwrap();
    let lib = ["libgmmv_ffi.so", "libgmmv_ffi.dylib"].iter().map(|n| libdir.join(n)).find(|p| p.exists());
    let lib = lib.expect("shared library built next to the test binary");
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let status = Command::new(cc)
        .arg(root.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg("-o")
        .arg(&exe)
        .arg(&lib)
        .arg(format!("-Wl,-rpath,{}", libdir.display()))
        .arg("-lm")
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).arg(small_config()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("ok "));
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}
