use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use affinelab_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(al_last_error()) }.to_string_lossy().into_owned()
}

fn surface(name: &str) -> *mut AlSurface {
    let name = CString::new(name).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { al_surface_new(name.as_ptr(), &mut s) }, AL_OK, "{}", last_error());
    s
}

#[test]
fn sphere_invariants_through_the_abi() {
    let s = surface("sphere(1)");
    let mut dim = 0usize;
    assert_eq!(unsafe { al_surface_dim(s, &mut dim) }, AL_OK);
    assert_eq!(dim, 2);
    let (mut y, mut lambda) = ([0.0; 3], [0.0; 2]);
    let mut out =
        AlInvariants { y: y.as_mut_ptr(), lambda: lambda.as_mut_ptr(), l1: 0.0, pick_norm_sq: 0.0, det_g: 0.0 };
    let u = [0.0, 0.0];
    assert_eq!(unsafe { al_invariants(s, u.as_ptr(), 2, 5, &mut out) }, AL_OK, "{}", last_error());
    assert!(last_error().is_empty());
    for (a, b) in y.iter().zip([0.0, 0.0, -1.0]) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(lambda.iter().all(|l| (l - 1.0).abs() < 1e-12));
    assert!((out.l1 - 1.0).abs() < 1e-12);
    assert!(out.pick_norm_sq.abs() < 1e-12);
    unsafe { al_surface_free(s) };
}

#[test]
fn parallel_and_detector() {
    let s = surface("sphere(1)");
    let mut lambda_mu = [0.0; 2];
    let mut out = AlParallel { det_t: 0.0, c: 0.0, lambda_mu: lambda_mu.as_mut_ptr() };
    let u = [0.1, -0.2];
    assert_eq!(unsafe { al_parallel(s, u.as_ptr(), 2, 0.5, 5, &mut out) }, AL_OK, "{}", last_error());
    assert!((out.det_t - 0.25).abs() < 1e-9);
    assert!((out.c - 2f64.sqrt()).abs() < 1e-7);
    assert!(lambda_mu.iter().all(|l| (l - 2.0 * 2f64.sqrt()).abs() < 1e-6));

    let grid: Vec<f64> =
        (0..3).flat_map(|i| (0..3).flat_map(move |j| [-0.3 + 0.3 * i as f64, -0.3 + 0.3 * j as f64])).collect();
    let (mut verdict, mut lambda) = (-1, [0.0; 2]);
    assert_eq!(unsafe { al_detect(s, grid.as_ptr(), 9, 5, &mut verdict, lambda.as_mut_ptr()) }, AL_OK);
    assert_eq!(verdict, AL_VERDICT_ISOPARAMETRIC);
    assert!(lambda.iter().all(|l| (l - 1.0).abs() < 1e-8));
    unsafe { al_surface_free(s) };

    let p = surface("perturbed(0.1)");
    let grid: Vec<f64> =
        (0..3).flat_map(|i| (0..3).flat_map(move |j| [-0.2 + 0.2 * i as f64, -0.2 + 0.2 * j as f64])).collect();
    assert_eq!(unsafe { al_detect(p, grid.as_ptr(), 9, 5, &mut verdict, ptr::null_mut()) }, AL_OK);
    assert_eq!(verdict, AL_VERDICT_NOT_ISOPARAMETRIC);
    unsafe { al_surface_free(p) };
}

#[test]
fn error_codes_and_messages() {
    let mut s = ptr::null_mut();
    let bad = CString::new("nosuch").unwrap();
    assert_eq!(unsafe { al_surface_new(bad.as_ptr(), &mut s) }, AL_ERR_CONFIG);
    assert!(last_error().contains("nosuch"));
    assert!(s.is_null());

    let parse = CString::new("custom:0.5*(u^2 +").unwrap();
    assert_eq!(unsafe { al_surface_new(parse.as_ptr(), &mut s) }, AL_ERR_CONFIG);
    assert!(last_error().contains("offset 10"), "{}", last_error());

    assert_eq!(unsafe { al_surface_new(ptr::null(), &mut s) }, AL_ERR_NULL);
    let mut dim = 0usize;
    assert_eq!(unsafe { al_surface_dim(ptr::null(), &mut dim) }, AL_ERR_NULL);

    let saddle = surface("custom:u*v");
    let (mut y, mut lambda) = ([0.0; 3], [0.0; 2]);
    let mut out =
        AlInvariants { y: y.as_mut_ptr(), lambda: lambda.as_mut_ptr(), l1: 0.0, pick_norm_sq: 0.0, det_g: 0.0 };
    let u = [0.1, 0.2];
    assert_eq!(unsafe { al_invariants(saddle, u.as_ptr(), 2, 5, &mut out) }, AL_ERR_COMPUTE);
    assert!(last_error().contains("convex"), "{}", last_error());
    assert_eq!(unsafe { al_invariants(saddle, u.as_ptr(), 3, 5, &mut out) }, AL_ERR_LENGTH);
    unsafe { al_surface_free(saddle) };

    let sphere = surface("sphere(1)");
    let mut lambda_mu = [0.0; 2];
    let mut par = AlParallel { det_t: 0.0, c: 0.0, lambda_mu: lambda_mu.as_mut_ptr() };
    assert_eq!(unsafe { al_parallel(sphere, u.as_ptr(), 2, 0.99, 5, &mut par) }, AL_ERR_CONFIG);
    unsafe { al_surface_free(sphere) };
    unsafe { al_surface_free(ptr::null_mut()) };
}

#[test]
fn json_report_round_trip() {
    let cmd = CString::new("invariants").unwrap();
    let cfg =
        CString::new(r#"{"surface": "paraboloid", "grid": {"counts": [2, 2], "bounds": [[-0.5, 0.5], [-0.5, 0.5]]}}"#)
            .unwrap();
    let (mut out, mut passed) = (ptr::null_mut(), 0);
    assert_eq!(unsafe { al_run_json(cmd.as_ptr(), cfg.as_ptr(), &mut out, &mut passed) }, AL_OK, "{}", last_error());
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe { al_string_free(out) };
    assert_eq!(passed, 1);
    assert!(text.contains("\"schema_version\": 1"));
    assert!(text.contains("\"verdict\": null"));

    let bad = CString::new(r#"{"jet_order": 3}"#).unwrap();
    assert_eq!(unsafe { al_run_json(cmd.as_ptr(), bad.as_ptr(), &mut out, &mut passed) }, AL_ERR_CONFIG);
    let unknown = CString::new("explode").unwrap();
    assert_eq!(unsafe { al_run_json(unknown.as_ptr(), ptr::null(), &mut out, &mut passed) }, AL_ERR_CONFIG);
}

#[test]
fn errors_are_thread_local() {
    let mut s = ptr::null_mut();
    let bad = CString::new("nosuch").unwrap();
    assert_eq!(unsafe { al_surface_new(bad.as_ptr(), &mut s) }, AL_ERR_CONFIG);
    let other = std::thread::spawn(last_error).join().unwrap();
    assert!(other.is_empty());
    assert!(!last_error().is_empty());
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let src = r#"
#include "affinelab.h"
int main(void) {
    AlSurface *s = 0;
    AlInvariants inv;
    AlParallel par;
    (void)inv; (void)par;
    int32_t rc = al_surface_new("sphere(1)", &s);
    al_surface_free(s);
    return rc == AL_OK ? 0 : 1;
}
"#;
    let dir = std::env::temp_dir().join(format!("affinelab-ffi-header-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for (lang, file) in [("c", "t.c"), ("c++", "t.cpp")] {
        let path = dir.join(file);
        std::fs::write(&path, src).unwrap();
        let status = Command::new("cc")
            .args(["-x", lang, "-fsyntax-only", "-Wall", "-Werror", "-I"])
            .arg(&header)
            .arg(&path)
            .status();
        match status {
            Ok(st) => assert!(st.success(), "header does not compile as {lang}"),
            Err(e) => panic!("no C compiler available: {e}"),
        }
    }
}
