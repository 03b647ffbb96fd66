//! C ABI over the `gnep` crate.
//!
//! Problems live behind an opaque `GnepHandle`. Every call returns a
//! `GnepStatus`; on failure `gnep_last_error_message` describes the error
//! raised on the calling thread. Strings returned by the library must be
//! released with `gnep_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use gnep::gnep::{check_gnep, CheckConfig, GnepProblem};
use gnep::io::{to_canonical, ProblemFile};
use gnep::normal::ConeConfig;
use gnep::vi::{solve_vi, vi_residual, SolveOutcome, SolverConfig};
use gnep::Error;

/// Result codes shared by every function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GnepStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Schema = 3,
    Model = 4,
    Usage = 5,
    /// The solver found no certified point.
    SolverFailure = 6,
    CertificateInvalid = 7,
    /// Verification ran and the point is not an equilibrium.
    NotEquilibrium = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Opaque problem handle.
pub struct GnepHandle {
    problem: GnepProblem,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn status_of(e: &Error) -> GnepStatus {
    match e {
        Error::Schema(_) | Error::Parse(_) => GnepStatus::Schema,
        Error::Usage { .. } => GnepStatus::Usage,
        Error::CertificateInvalid(_) => GnepStatus::CertificateInvalid,
        Error::Cone(_) => GnepStatus::SolverFailure,
        _ => GnepStatus::Model,
    }
}

fn guard<F: FnOnce() -> Result<GnepStatus, (GnepStatus, String)>>(f: F) -> GnepStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic");
            GnepStatus::Panic
        }
    }
}

fn fail(e: Error) -> (GnepStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (GnepStatus, String) {
    (GnepStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (GnepStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (GnepStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a>(h: *const GnepHandle) -> Result<&'a GnepHandle, (GnepStatus, String)> {
    h.as_ref().ok_or_else(|| null("handle"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, h: &GnepHandle, what: &str) -> Result<&'a [f64], (GnepStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    if len != h.problem.n() {
        return Err((
            GnepStatus::Usage,
            format!("{what} has {len} entries, expected {}", h.problem.n()),
        ));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put_handle(out: *mut *mut GnepHandle, problem: GnepProblem) -> Result<GnepStatus, (GnepStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(GnepHandle { problem }));
    Ok(GnepStatus::Ok)
}

/// Message of the last failed call on this thread; empty if none. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gnep_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a problem file (JSON text).
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gnep_problem_from_json(json: *const c_char, out: *mut *mut GnepHandle) -> GnepStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        let problem = ProblemFile::from_json(text)
            .and_then(|f| f.to_problem())
            .map_err(fail)?;
        put_handle(out, problem)
    })
}

/// Loads a built-in problem by name.
///
/// # Safety
/// `name` must be a valid NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gnep_problem_from_fixture(name: *const c_char, out: *mut *mut GnepHandle) -> GnepStatus {
    guard(|| {
        let name = read_str(name, "name")?;
        let f = gnep::fixtures::fixture_by_name(name)
            .ok_or_else(|| (GnepStatus::Usage, format!("unknown fixture '{name}'")))?;
        put_handle(out, f.problem)
    })
}

/// # Safety
/// `h` must come from this library and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn gnep_problem_free(h: *mut GnepHandle) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gnep_problem_num_players(h: *const GnepHandle, out: *mut usize) -> GnepStatus {
    guard(|| {
        let h = handle(h)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = h.problem.num_players();
        Ok(GnepStatus::Ok)
    })
}

/// Total number of variables.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gnep_problem_dim(h: *const GnepHandle, out: *mut usize) -> GnepStatus {
    guard(|| {
        let h = handle(h)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = h.problem.n();
        Ok(GnepStatus::Ok)
    })
}

fn solver_config(h: &GnepHandle, seed: u64) -> SolverConfig {
    SolverConfig {
        seed,
        residual_tol: h.problem.tolerances.residual_tol,
        ..SolverConfig::default()
    }
}

/// Solves the VI. On `GNEP_STATUS_OK`, `x_out` (length `len` = dim) holds
/// the certified point and `residual_out` its residual.
///
/// # Safety
/// `h` must be a live handle, `x_out` writable for `len` doubles and
/// `residual_out` writable or null.
#[no_mangle]
pub unsafe extern "C" fn gnep_solve(
    h: *const GnepHandle,
    seed: u64,
    x_out: *mut f64,
    len: usize,
    residual_out: *mut f64,
) -> GnepStatus {
    guard(|| {
        let h = handle(h)?;
        if x_out.is_null() {
            return Err(null("x_out"));
        }
        if len < h.problem.n() {
            return Err((GnepStatus::BufferTooSmall, format!("need {} entries", h.problem.n())));
        }
        match solve_vi(&h.problem, &solver_config(h, seed)).map_err(fail)? {
            SolveOutcome::Certified(c) => {
                std::slice::from_raw_parts_mut(x_out, c.x.len()).copy_from_slice(&c.x);
                if let Some(r) = residual_out.as_mut() {
                    *r = c.residual;
                }
                Ok(GnepStatus::Ok)
            }
            SolveOutcome::Failure(f) => Err((
                GnepStatus::SolverFailure,
                format!("no certified point (best residual {:e})", f.best_residual),
            )),
        }
    })
}

/// Like `gnep_solve`, writing the full report as canonical JSON to `*out`
/// (free with `gnep_string_free`). Returns `GNEP_STATUS_SOLVER_FAILURE`
/// with a report when no point is certified.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gnep_solve_json(h: *const GnepHandle, seed: u64, out: *mut *mut c_char) -> GnepStatus {
    guard(|| {
        let h = handle(h)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let outcome = solve_vi(&h.problem, &solver_config(h, seed)).map_err(fail)?;
        let status = match &outcome {
            SolveOutcome::Certified(_) => GnepStatus::Ok,
            SolveOutcome::Failure(_) => {
                set_error("no certified point");
                GnepStatus::SolverFailure
            }
        };
        let text = CString::new(to_canonical(&outcome)).map_err(|_| (GnepStatus::Panic, "NUL in report".into()))?;
        *out = text.into_raw();
        Ok(status)
    })
}

/// # Safety
/// `s` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn gnep_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Maximum per-player regret at `x`; `GNEP_STATUS_NOT_EQUILIBRIUM` when it
/// exceeds `eps` (the value is still written).
///
/// # Safety
/// `h` must be a live handle, `x` readable for `len` doubles and
/// `max_regret_out` writable or null.
#[no_mangle]
pub unsafe extern "C" fn gnep_verify(
    h: *const GnepHandle,
    x: *const f64,
    len: usize,
    eps: f64,
    max_regret_out: *mut f64,
) -> GnepStatus {
    guard(|| {
        let h = handle(h)?;
        let x = slice(x, len, h, "x")?;
        let r = check_gnep(&h.problem, x, &CheckConfig::default()).map_err(fail)?;
        if let Some(o) = max_regret_out.as_mut() {
            *o = r.max_regret;
        }
        if r.is_eps_gne(eps) {
            Ok(GnepStatus::Ok)
        } else {
            Err((
                GnepStatus::NotEquilibrium,
                format!("max regret {:e} exceeds {eps:e}", r.max_regret),
            ))
        }
    })
}

/// `min_y <w, y - x>` over the shared set after checking `w` against `T(x)`.
///
/// # Safety
/// `h` must be a live handle, `x` and `w` readable for `len` doubles and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gnep_vi_residual(
    h: *const GnepHandle,
    x: *const f64,
    w: *const f64,
    len: usize,
    out: *mut f64,
) -> GnepStatus {
    guard(|| {
        let h = handle(h)?;
        let x = slice(x, len, h, "x")?;
        let w = slice(w, len, h, "w")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = vi_residual(&h.problem, x, w, &ConeConfig::default()).map_err(fail)?;
        Ok(GnepStatus::Ok)
    })
}
