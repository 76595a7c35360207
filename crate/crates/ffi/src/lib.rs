//! C interface to the exact solvers and the simulator.
//!
//! Models and profiles are opaque handles built from JSON and released with
//! the matching `_free` call. Every fallible call returns an [`SsepStatus`];
//! the message of the last failure on the calling thread is available from
//! [`ssep_last_error`]. Array outputs are caller-allocated and row-major, one
//! row per requested time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ssep_hydro::boundary::{boundary_report, left_density};
use ssep_hydro::field::{solve_correlation, solve_density};
use ssep_hydro::kmc::{ensemble_density, simulate};
use ssep_hydro::{Error, InitialProfile, ModelSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsepStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    NonUniqueStationary = 5,
    Unsupported = 6,
    SizeLimit = 7,
    BufferTooSmall = 8,
    Internal = 9,
}

/// A validated model.
pub struct SsepModel(ModelSpec);

/// An initial density profile.
pub struct SsepProfile(InitialProfile);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SsepStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Contract(_) | Error::InvalidModel(_) => SsepStatus::InvalidArgument,
            Error::NonUniqueStationary(_) => SsepStatus::NonUniqueStationary,
            Error::Unsupported(_) => SsepStatus::Unsupported,
            Error::SizeLimit(_) => SsepStatus::SizeLimit,
            Error::Json(_) | Error::Config(_) => SsepStatus::ParseError,
            _ => SsepStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: SsepStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `body`, recording any failure (including a panic) for `ssep_last_error`.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SsepStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SsepStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SsepStatus::Internal
        }
    }
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(fail(SsepStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(SsepStatus::InvalidUtf8, "string is not UTF-8"))
}

unsafe fn reference<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(SsepStatus::NullPointer, format!("null {what}")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(SsepStatus::NullPointer, format!("null {what}")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return Err(fail(SsepStatus::NullPointer, format!("null {what}")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn check_len(have: usize, need: usize) -> Result<(), Failure> {
    if have < need {
        return Err(fail(
            SsepStatus::BufferTooSmall,
            format!("output holds {have} values, {need} needed"),
        ));
    }
    Ok(())
}

unsafe fn store<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(SsepStatus::NullPointer, format!("null {what}")));
    }
    *out = value;
    Ok(())
}

/// Parses a model from JSON (keys `N`, `p`, `beta`, `left`).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssep_model_from_json(
    json: *const c_char,
    out: *mut *mut SsepModel,
) -> SsepStatus {
    guard(|| {
        reference(out, "output handle")?;
        let spec = ModelSpec::from_json(text(json)?)?;
        store(
            out,
            Box::into_raw(Box::new(SsepModel(spec))),
            "output handle",
        )
    })
}

/// # Safety
/// `model` must come from `ssep_model_from_json` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ssep_model_free(model: *mut SsepModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of lattice sites `N - 1`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssep_model_sites(model: *const SsepModel, out: *mut usize) -> SsepStatus {
    guard(|| {
        let m = reference(model, "model")?;
        store(out, m.0.sites(), "output")
    })
}

/// Parses a profile from JSON, e.g. `{"kind": "linear", "left": 0.2, "right": 0.8}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssep_profile_from_json(
    json: *const c_char,
    out: *mut *mut SsepProfile,
) -> SsepStatus {
    guard(|| {
        reference(out, "output handle")?;
        let profile: InitialProfile = serde_json::from_str(text(json)?)
            .map_err(|e| fail(SsepStatus::ParseError, e.to_string()))?;
        profile.validate()?;
        store(
            out,
            Box::into_raw(Box::new(SsepProfile(profile))),
            "output handle",
        )
    })
}

/// # Safety
/// `profile` must come from `ssep_profile_from_json` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ssep_profile_free(profile: *mut SsepProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Effective density the boundary block imposes on the bulk.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssep_left_density(model: *const SsepModel, out: *mut f64) -> SsepStatus {
    guard(|| {
        let m = reference(model, "model")?;
        store(out, left_density(&m.0)?, "output")
    })
}

/// Writes the boundary-chain report as NUL-terminated JSON into `buf`.
///
/// `needed` (if not null) receives the size including the terminator; with
/// `cap` too small the call returns `BUFFER_TOO_SMALL` and writes nothing.
///
/// # Safety
/// `buf` must hold `cap` bytes (it may be null when `cap` is 0).
#[no_mangle]
pub unsafe extern "C" fn ssep_boundary_report_json(
    model: *const SsepModel,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> SsepStatus {
    guard(|| {
        let m = reference(model, "model")?;
        let json = serde_json::to_string(&boundary_report(&m.0)?)
            .map_err(|e| fail(SsepStatus::Internal, e.to_string()))?;
        let size = json.len() + 1;
        if !needed.is_null() {
            *needed = size;
        }
        check_len(cap, size)?;
        let out = slice_mut(buf as *mut u8, cap, "buffer")?;
        out[..json.len()].copy_from_slice(json.as_bytes());
        out[json.len()] = 0;
        Ok(())
    })
}

/// Densities at sites `1..N-1` for each time: `n_times * (N-1)` values.
///
/// # Safety
/// `times` must hold `n_times` values and `out` `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn ssep_solve_density(
    model: *const SsepModel,
    profile: *const SsepProfile,
    times: *const f64,
    n_times: usize,
    out: *mut f64,
    out_len: usize,
) -> SsepStatus {
    guard(|| {
        let m = reference(model, "model")?;
        let p = reference(profile, "profile")?;
        let t = slice(times, n_times, "times")?;
        check_len(out_len, n_times * m.0.sites())?;
        let field = solve_density(&m.0, &p.0, t)?;
        let out = slice_mut(out, out_len, "output")?;
        for (dst, v) in out.iter_mut().zip(field.rho.iter().flatten()) {
            *dst = *v;
        }
        Ok(())
    })
}

/// Pair correlations for each time, ordered `(1,2), (1,3), (2,3), (1,4), ...`
/// (by `l`, then `k`): `n_times * (N-1)(N-2)/2` values.
///
/// # Safety
/// `times` must hold `n_times` values and `out` `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn ssep_solve_correlation(
    model: *const SsepModel,
    profile: *const SsepProfile,
    times: *const f64,
    n_times: usize,
    out: *mut f64,
    out_len: usize,
) -> SsepStatus {
    guard(|| {
        let m = reference(model, "model")?;
        let p = reference(profile, "profile")?;
        let t = slice(times, n_times, "times")?;
        let sites = m.0.sites();
        check_len(out_len, n_times * sites * (sites - 1) / 2)?;
        let field = solve_correlation(&m.0, &p.0, t)?;
        let out = slice_mut(out, out_len, "output")?;
        for (dst, v) in out.iter_mut().zip(field.phi.iter().flatten()) {
            *dst = *v;
        }
        Ok(())
    })
}

/// One trajectory: occupations (0 or 1) of sites `1..N-1` at each time.
///
/// # Safety
/// `times` must hold `n_times` values and `out` `out_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ssep_simulate(
    model: *const SsepModel,
    profile: *const SsepProfile,
    times: *const f64,
    n_times: usize,
    seed: u64,
    out: *mut u8,
    out_len: usize,
) -> SsepStatus {
    guard(|| {
        let m = reference(model, "model")?;
        let p = reference(profile, "profile")?;
        let t = slice(times, n_times, "times")?;
        check_len(out_len, n_times * m.0.sites())?;
        let traj = simulate(&m.0, &p.0, t, seed)?;
        let out = slice_mut(out, out_len, "output")?;
        let flat = traj
            .checkpoints
            .iter()
            .flat_map(|(_, c)| c.as_slice().iter());
        for (dst, v) in out.iter_mut().zip(flat) {
            *dst = *v;
        }
        Ok(())
    })
}

/// Ensemble mean density and its standard error, replicas seeded
/// `seed_base + i`; each output holds `n_times * (N-1)` values.
///
/// # Safety
/// `times` must hold `n_times` values, `mean` and `stderr` `out_len` each.
#[no_mangle]
pub unsafe extern "C" fn ssep_ensemble_density(
    model: *const SsepModel,
    profile: *const SsepProfile,
    times: *const f64,
    n_times: usize,
    replicas: usize,
    seed_base: u64,
    mean: *mut f64,
    stderr: *mut f64,
    out_len: usize,
) -> SsepStatus {
    guard(|| {
        let m = reference(model, "model")?;
        let p = reference(profile, "profile")?;
        let t = slice(times, n_times, "times")?;
        let sites = m.0.sites();
        check_len(out_len, n_times * sites)?;
        let stats = ensemble_density(&m.0, &p.0, t, replicas, seed_base)?;
        let mean = slice_mut(mean, out_len, "mean")?;
        let stderr = slice_mut(stderr, out_len, "stderr")?;
        for ti in 0..n_times {
            for k in 1..=sites {
                let e = stats.rho(ti, k);
                mean[ti * sites + k - 1] = e.value;
                stderr[ti * sites + k - 1] = e.stderr;
            }
        }
        Ok(())
    })
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ssep_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ssep_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}
