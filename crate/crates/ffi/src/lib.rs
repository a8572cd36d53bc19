//! C ABI over the affinelab library.
//!
//! Every function returns an `int32_t` status; on failure the message is
//! available from `al_last_error` until the next call on the same thread.
//! Surfaces are opaque handles released with `al_surface_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use affinelab::catalog::{self, CatalogEntry};
use affinelab::invariants::frame_point;
use affinelab::parallel::parallel_record;
use affinelab::report::{self, Command, RunConfig};
use affinelab::tube::{constant_principal_detector, Verdict};
use affinelab::Error;

pub const AL_OK: i32 = 0;
/// A required pointer argument was null.
pub const AL_ERR_NULL: i32 = 1;
/// A string argument was not valid UTF-8.
pub const AL_ERR_UTF8: i32 = 2;
/// Unknown surface, parse error, bad configuration or inadmissible `mu`.
pub const AL_ERR_CONFIG: i32 = 3;
/// The computation failed (degenerate or non-convex point, outside the tube, ...).
pub const AL_ERR_COMPUTE: i32 = 4;
/// Output buffer too small or argument length mismatch.
pub const AL_ERR_LENGTH: i32 = 5;
/// A panic was caught at the boundary.
pub const AL_ERR_PANIC: i32 = 6;

pub const AL_VERDICT_ISOPARAMETRIC: i32 = 0;
pub const AL_VERDICT_NOT_ISOPARAMETRIC: i32 = 1;
pub const AL_VERDICT_INCONCLUSIVE: i32 = 2;

/// Opaque surface handle.
pub struct AlSurface {
    entry: CatalogEntry,
}

/// Invariants at one parameter point of a surface of dimension `n`.
/// Caller-owned buffers: `y` has `n + 1` entries, `lambda` has `n`.
#[repr(C)]
pub struct AlInvariants {
    pub y: *mut f64,
    pub lambda: *mut f64,
    /// Affine mean curvature.
    pub l1: f64,
    /// Squared Fubini-Pick norm.
    pub pick_norm_sq: f64,
    /// Determinant of the Blaschke metric.
    pub det_g: f64,
}

/// Parallel-family data at one point; `lambda_mu` has `n` entries.
#[repr(C)]
pub struct AlParallel {
    pub det_t: f64,
    pub c: f64,
    pub lambda_mu: *mut f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(i32, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = if report::is_usage_error(&e) { AL_ERR_CONFIG } else { AL_ERR_COMPUTE };
        Failure(code, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> i32 {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AL_OK,
        Ok(Err(Failure(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("panic inside affinelab");
            AL_ERR_PANIC
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(AL_ERR_NULL, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(AL_ERR_UTF8, format!("{what} is not valid UTF-8")))
}

unsafe fn surface<'a>(s: *const AlSurface) -> Result<&'a CatalogEntry, Failure> {
    s.as_ref().map(|s| &s.entry).ok_or_else(|| null("surface"))
}

unsafe fn point(s: &CatalogEntry, u: *const f64, n: usize) -> Result<Vec<f64>, Failure> {
    if u.is_null() {
        return Err(null("u"));
    }
    if n != s.dim() {
        return Err(Failure(AL_ERR_LENGTH, format!("point has {n} coordinates, surface has dimension {}", s.dim())));
    }
    Ok(std::slice::from_raw_parts(u, n).to_vec())
}

unsafe fn write(dst: *mut f64, src: &[f64], what: &str) -> Result<(), Failure> {
    if dst.is_null() {
        return Err(null(what));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Message of the last failed call on this thread; empty after success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn al_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Create a surface from a catalog name such as `sphere(1)` or `custom:1/(u*v)`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn al_surface_new(name: *const c_char, out: *mut *mut AlSurface) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let entry = catalog::get(read_str(name, "name")?)?;
        *out = Box::into_raw(Box::new(AlSurface { entry }));
        Ok(())
    })
}

/// Release a handle; null is ignored.
///
/// # Safety
/// `s` must come from `al_surface_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn al_surface_free(s: *mut AlSurface) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of parameters of the surface.
///
/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn al_surface_dim(s: *const AlSurface, out: *mut usize) -> i32 {
    guard(|| {
        let entry = surface(s)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = entry.dim();
        Ok(())
    })
}

/// Blaschke invariants at `u` (length `n`) with jets of order `order`.
///
/// # Safety
/// `s` must be a live handle, `u` must hold `n` doubles and the buffers of `out`
/// must have the documented lengths.
#[no_mangle]
pub unsafe extern "C" fn al_invariants(
    s: *const AlSurface,
    u: *const f64,
    n: usize,
    order: u32,
    out: *mut AlInvariants,
) -> i32 {
    guard(|| {
        let entry = surface(s)?;
        let u = point(entry, u, n)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let p = frame_point(entry.immersion.as_ref(), &u, order as usize)?;
        write(out.y, &p.y, "out.y")?;
        write(out.lambda, &p.lambda, "out.lambda")?;
        out.l1 = p.mean_curvature();
        out.pick_norm_sq = p.pick_norm_sq();
        out.det_g = p.det_g();
        Ok(())
    })
}

/// Transfer data of the parallel hypersurface `x + mu Y` at `u`.
///
/// # Safety
/// As for `al_invariants`; `out.lambda_mu` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn al_parallel(
    s: *const AlSurface,
    u: *const f64,
    n: usize,
    mu: f64,
    order: u32,
    out: *mut AlParallel,
) -> i32 {
    guard(|| {
        let entry = surface(s)?;
        let u = point(entry, u, n)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let rec = parallel_record(&entry.immersion, &u, mu, order as usize)?;
        write(out.lambda_mu, &rec.lambda_mu, "out.lambda_mu")?;
        out.det_t = rec.det_t;
        out.c = rec.c;
        Ok(())
    })
}

/// Constant-principal-curvature verdict over `count` points stored row-major in
/// `grid` (`count * dim` doubles). On an isoparametric verdict the constant
/// curvatures are written to `lambda` (`dim` doubles) when it is non-null.
///
/// # Safety
/// `grid` must hold `count * dim` doubles and `verdict` must be valid.
#[no_mangle]
pub unsafe extern "C" fn al_detect(
    s: *const AlSurface,
    grid: *const f64,
    count: usize,
    order: u32,
    verdict: *mut i32,
    lambda: *mut f64,
) -> i32 {
    guard(|| {
        let entry = surface(s)?;
        if grid.is_null() {
            return Err(null("grid"));
        }
        if verdict.is_null() {
            return Err(null("verdict"));
        }
        if count == 0 {
            return Err(Failure(AL_ERR_LENGTH, "empty grid".into()));
        }
        let n = entry.dim();
        let pts: Vec<Vec<f64>> = std::slice::from_raw_parts(grid, count * n).chunks(n).map(<[f64]>::to_vec).collect();
        let rep = constant_principal_detector(&entry.immersion, &pts, order as usize)?;
        *verdict = match rep.verdict {
            Verdict::Isoparametric => AL_VERDICT_ISOPARAMETRIC,
            Verdict::NotIsoparametric => AL_VERDICT_NOT_ISOPARAMETRIC,
            Verdict::Inconclusive => AL_VERDICT_INCONCLUSIVE,
        };
        if let (Some(cert), false) = (&rep.certificate, lambda.is_null()) {
            write(lambda, &cert.lambda, "lambda")?;
        }
        Ok(())
    })
}

/// Run `invariants`, `parallel`, `isoparametric` or `verify-all` with a JSON
/// configuration (null for defaults) and return the JSON report in `*out`,
/// to be released with `al_string_free`. `*passed` is 1 when the run meets the
/// exit-0 contract of the command-line tool.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` and `passed` must be valid.
#[no_mangle]
pub unsafe extern "C" fn al_run_json(
    command: *const c_char,
    config_json: *const c_char,
    out: *mut *mut c_char,
    passed: *mut i32,
) -> i32 {
    guard(|| {
        if out.is_null() || passed.is_null() {
            return Err(null("out"));
        }
        let command = match read_str(command, "command")? {
            "invariants" => Command::Invariants,
            "parallel" => Command::Parallel,
            "isoparametric" => Command::Isoparametric,
            "verify-all" => Command::VerifyAll,
            other => return Err(Failure(AL_ERR_CONFIG, format!("unknown command `{other}`"))),
        };
        let cfg = if config_json.is_null() {
            RunConfig::default()
        } else {
            RunConfig::from_json(read_str(config_json, "config_json")?)?
        };
        let rep = report::run(command, &cfg)?;
        let json = CString::new(rep.to_json()?).map_err(|e| Failure(AL_ERR_COMPUTE, e.to_string()))?;
        *passed = report::is_success(&rep) as i32;
        *out = json.into_raw();
        Ok(())
    })
}

/// Release a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn al_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
