//! C interface to the kernelized Hopfield memory library.
//!
//! Conventions, mirrored in `include/khop.h`:
//!
//! * Objects cross the boundary as opaque pointers created by `*_new`-style
//!   constructors and released by the matching `*_free`; every other
//!   function borrows them.
//! * Fallible calls return a `KhopStatus`; `KHOP_OK` is zero. On any other
//!   status the output parameters are untouched and a description is
//!   available from `khop_last_error` until the next failure on the same
//!   thread.
//! * Pattern and query buffers are column-major `f64`: pattern `mu` occupies
//!   `data[mu*d .. (mu+1)*d]`.
//! * Panics are caught at the boundary and reported as `KHOP_PANIC` rather
//!   than unwinding into the caller.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ndarray::ArrayView1;

use khop::hopfield::energy;
use khop::uhop::{train, LipschitzMode, TrainConfig};
use khop::{retrieve, Error, FeatureMap, NormKind, PatternSet, RetrievalConfig};

/// Stored patterns (opaque to C callers).
pub struct KhopPatternSet(PatternSet);

/// Linear feature map (opaque to C callers).
pub struct KhopFeatureMap(FeatureMap);

/// Result codes for every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum KhopStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericError = 3,
    IoError = 4,
    Panic = 5,
}

pub const KHOP_NORM_SOFTMAX: c_int = 0;
pub const KHOP_NORM_SPARSEMAX: c_int = 1;
pub const KHOP_NORM_ENTMAX15: c_int = 2;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: Vec<u8> = msg.bytes().filter(|&b| b != 0).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: KhopStatus, msg: &str) -> KhopStatus {
    set_error(msg);
    status
}

fn status_of(err: &Error) -> KhopStatus {
    match err {
        Error::Io(_) => KhopStatus::IoError,
        Error::NonFinite
        | Error::BisectionNoConverge { .. }
        | Error::InvalidLogArgument { .. }
        | Error::DegenerateRadius => KhopStatus::NumericError,
        _ => KhopStatus::InvalidArgument,
    }
}

fn report(err: &Error) -> KhopStatus {
    fail(status_of(err), &err.to_string())
}

/// Run `f`, converting panics into `KHOP_PANIC`.
fn guard<F: FnOnce() -> KhopStatus>(f: F) -> KhopStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in library call".to_string());
            fail(KhopStatus::Panic, &msg)
        }
    }
}

fn parse_norm(norm: c_int) -> Option<NormKind> {
    match norm {
        KHOP_NORM_SOFTMAX => Some(NormKind::Softmax),
        KHOP_NORM_SPARSEMAX => Some(NormKind::Sparsemax),
        KHOP_NORM_ENTMAX15 => Some(NormKind::Entmax15),
        _ => None,
    }
}

/// Copy the most recent error message on this thread into `buf`.
///
/// Returns the message length in bytes (excluding the terminator). When
/// `cap` is positive the copy is truncated to `cap - 1` bytes and always
/// NUL-terminated; a null `buf` or zero `cap` just reports the length.
///
/// # Safety
///
/// `buf` must either be null or point to at least `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn khop_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn khop_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Generate `m` unit-norm patterns of dimension `d` from a seeded stream.
///
/// # Safety
///
/// `out` must be a valid, writable pointer.
#[no_mangle]
pub unsafe extern "C" fn khop_patterns_synthetic(
    m: usize,
    d: usize,
    seed: u64,
    out: *mut *mut KhopPatternSet,
) -> KhopStatus {
    guard(|| {
        if out.is_null() {
            return fail(KhopStatus::NullPointer, "out is null");
        }
        match khop::patterns::generate_synthetic(m, d, seed) {
            Ok(set) => {
                unsafe { *out = Box::into_raw(Box::new(KhopPatternSet(set))) };
                KhopStatus::Ok
            }
            Err(e) => report(&e),
        }
    })
}

/// Wrap caller-provided column-major data (`d * m` doubles) as a pattern
/// set. The data is copied; the caller keeps ownership of `data`.
///
/// # Safety
///
/// `data` must point to `d * m` readable doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn khop_patterns_from_columns(
    data: *const f64,
    d: usize,
    m: usize,
    out: *mut *mut KhopPatternSet,
) -> KhopStatus {
    guard(|| {
        if data.is_null() || out.is_null() {
            return fail(KhopStatus::NullPointer, "data or out is null");
        }
        let flat = unsafe { std::slice::from_raw_parts(data, d * m) };
        match PatternSet::from_flat(flat, d, m) {
            Ok(set) => {
                unsafe { *out = Box::into_raw(Box::new(KhopPatternSet(set))) };
                KhopStatus::Ok
            }
            Err(e) => report(&e),
        }
    })
}

/// Release a pattern set. Null is a no-op; double frees are undefined.
///
/// # Safety
///
/// `set` must be null or a pointer returned by a `khop_patterns_*`
/// constructor that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn khop_patterns_free(set: *mut KhopPatternSet) {
    if !set.is_null() {
        drop(unsafe { Box::from_raw(set) });
    }
}

/// Number of stored patterns; 0 for a null handle.
///
/// # Safety
///
/// `set` must be null or a live pattern-set handle.
#[no_mangle]
pub unsafe extern "C" fn khop_patterns_len(set: *const KhopPatternSet) -> usize {
    unsafe { set.as_ref() }.map_or(0, |s| s.0.len())
}

/// Pattern dimension; 0 for a null handle.
///
/// # Safety
///
/// `set` must be null or a live pattern-set handle.
#[no_mangle]
pub unsafe extern "C" fn khop_patterns_dim(set: *const KhopPatternSet) -> usize {
    unsafe { set.as_ref() }.map_or(0, |s| s.0.dim())
}

/// The identity feature map on dimension `d` (plain retrieval dynamics).
///
/// # Safety
///
/// `out` must be a valid, writable pointer.
#[no_mangle]
pub unsafe extern "C" fn khop_feature_map_identity(
    d: usize,
    out: *mut *mut KhopFeatureMap,
) -> KhopStatus {
    guard(|| {
        if out.is_null() {
            return fail(KhopStatus::NullPointer, "out is null");
        }
        match FeatureMap::identity(d) {
            Ok(map) => {
                unsafe { *out = Box::into_raw(Box::new(KhopFeatureMap(map))) };
                KhopStatus::Ok
            }
            Err(e) => report(&e),
        }
    })
}

/// A seeded random Gaussian map from dimension `d` to `d_phi`;
/// `normalize != 0` rescales every output to unit length.
///
/// # Safety
///
/// `out` must be a valid, writable pointer.
#[no_mangle]
pub unsafe extern "C" fn khop_feature_map_random(
    d: usize,
    d_phi: usize,
    seed: u64,
    normalize: c_int,
    out: *mut *mut KhopFeatureMap,
) -> KhopStatus {
    guard(|| {
        if out.is_null() {
            return fail(KhopStatus::NullPointer, "out is null");
        }
        match FeatureMap::random(d, d_phi, seed) {
            Ok(map) => {
                let map = map.with_normalize(normalize != 0);
                unsafe { *out = Box::into_raw(Box::new(KhopFeatureMap(map))) };
                KhopStatus::Ok
            }
            Err(e) => report(&e),
        }
    })
}

/// Train a feature map of output dimension `d_phi` on `set` by projected
/// gradient descent on the separation objective (`iters` iterations,
/// initial step `lr`, temperature `tau`, seed for the initial weights).
/// On success writes the new map to `out` and, when `final_loss` is not
/// null, the last training loss.
///
/// # Safety
///
/// `set` must be a live handle, `out` valid and writable, and `final_loss`
/// null or valid.
#[no_mangle]
pub unsafe extern "C" fn khop_feature_map_train(
    set: *const KhopPatternSet,
    d_phi: usize,
    iters: usize,
    lr: f64,
    tau: f64,
    seed: u64,
    out: *mut *mut KhopFeatureMap,
    final_loss: *mut f64,
) -> KhopStatus {
    guard(|| {
        let Some(set) = (unsafe { set.as_ref() }) else {
            return fail(KhopStatus::NullPointer, "set is null");
        };
        if out.is_null() {
            return fail(KhopStatus::NullPointer, "out is null");
        }
        let cfg = TrainConfig {
            iters,
            lr,
            tau,
            lipschitz: LipschitzMode::Backtracking,
            seed,
        };
        match train(&set.0, d_phi, &cfg) {
            Ok(result) => {
                let loss = result
                    .log
                    .last()
                    .map_or(result.initial_loss, |row| row.loss);
                if !final_loss.is_null() {
                    unsafe { *final_loss = loss };
                }
                unsafe { *out = Box::into_raw(Box::new(KhopFeatureMap(result.phi))) };
                KhopStatus::Ok
            }
            Err(e) => report(&e),
        }
    })
}

/// Release a feature map. Null is a no-op; double frees are undefined.
///
/// # Safety
///
/// `map` must be null or a pointer returned by a `khop_feature_map_*`
/// constructor that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn khop_feature_map_free(map: *mut KhopFeatureMap) {
    if !map.is_null() {
        drop(unsafe { Box::from_raw(map) });
    }
}

/// Output dimension of a feature map; 0 for a null handle.
///
/// # Safety
///
/// `map` must be null or a live feature-map handle.
#[no_mangle]
pub unsafe extern "C" fn khop_feature_map_dim_out(map: *const KhopFeatureMap) -> usize {
    unsafe { map.as_ref() }.map_or(0, |m| m.0.dim_out())
}

/// Iterated memory retrieval from `x0` (length `d`). `map` may be null for
/// the plain model. Writes the final iterate to `x_out` (length `d`) and,
/// when the pointers are not null, the step count and whether the iteration
/// converged before `max_iters`.
///
/// # Safety
///
/// `set` must be live, `map` null or live, `x0` readable and `x_out`
/// writable for `d` doubles, `steps` and `converged` null or valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn khop_retrieve(
    set: *const KhopPatternSet,
    map: *const KhopFeatureMap,
    beta: f64,
    norm: c_int,
    max_iters: usize,
    tol: f64,
    x0: *const f64,
    x_out: *mut f64,
    steps: *mut usize,
    converged: *mut c_int,
) -> KhopStatus {
    guard(|| {
        let Some(set) = (unsafe { set.as_ref() }) else {
            return fail(KhopStatus::NullPointer, "set is null");
        };
        if x0.is_null() || x_out.is_null() {
            return fail(KhopStatus::NullPointer, "x0 or x_out is null");
        }
        let Some(kind) = parse_norm(norm) else {
            return fail(KhopStatus::InvalidArgument, "unknown norm code");
        };
        let d = set.0.dim();
        let x0 = unsafe { std::slice::from_raw_parts(x0, d) };
        let cfg = RetrievalConfig::new(beta)
            .norm(kind)
            .max_iters(max_iters)
            .tol(tol);
        let phi = unsafe { map.as_ref() }.map(|m| &m.0);
        match retrieve(&set.0, phi, &cfg, &ArrayView1::from(x0)) {
            Ok(result) => {
                let last = result.last();
                let out = unsafe { std::slice::from_raw_parts_mut(x_out, d) };
                out.copy_from_slice(last.as_slice().expect("contiguous iterate"));
                if !steps.is_null() {
                    unsafe { *steps = result.steps };
                }
                if !converged.is_null() {
                    unsafe { *converged = c_int::from(result.converged) };
                }
                KhopStatus::Ok
            }
            Err(e) => report(&e),
        }
    })
}

/// Energy of state `x` (length `d`) under the model; `map` may be null for
/// the plain model.
///
/// # Safety
///
/// `set` must be live, `map` null or live, `x` readable for `d` doubles,
/// `out` valid and writable.
#[no_mangle]
pub unsafe extern "C" fn khop_energy(
    set: *const KhopPatternSet,
    map: *const KhopFeatureMap,
    beta: f64,
    x: *const f64,
    out: *mut f64,
) -> KhopStatus {
    guard(|| {
        let Some(set) = (unsafe { set.as_ref() }) else {
            return fail(KhopStatus::NullPointer, "set is null");
        };
        if x.is_null() || out.is_null() {
            return fail(KhopStatus::NullPointer, "x or out is null");
        }
        let x = unsafe { std::slice::from_raw_parts(x, set.0.dim()) };
        let phi = unsafe { map.as_ref() }.map(|m| &m.0);
        match energy(&set.0, phi, beta, &ArrayView1::from(x)) {
            Ok(value) => {
                unsafe { *out = value };
                KhopStatus::Ok
            }
            Err(e) => report(&e),
        }
    })
}

/// Worst-pair kernel separation (`delta_min`) and half minimal feature
/// distance (`r_phi`) of the mapped pattern set. Either output pointer may
/// be null to skip it.
///
/// # Safety
///
/// `set` and `map` must be live handles; `delta_min` and `r_phi` null or
/// valid.
#[no_mangle]
pub unsafe extern "C" fn khop_separation_stats(
    set: *const KhopPatternSet,
    map: *const KhopFeatureMap,
    delta_min: *mut f64,
    r_phi: *mut f64,
) -> KhopStatus {
    guard(|| {
        let Some(set) = (unsafe { set.as_ref() }) else {
            return fail(KhopStatus::NullPointer, "set is null");
        };
        let Some(map) = (unsafe { map.as_ref() }) else {
            return fail(KhopStatus::NullPointer, "map is null");
        };
        match map.0.separation_stats(&set.0) {
            Ok(stats) => {
                if !delta_min.is_null() {
                    unsafe { *delta_min = stats.delta_min };
                }
                if !r_phi.is_null() {
                    unsafe { *r_phi = stats.r_phi };
                }
                KhopStatus::Ok
            }
            Err(e) => report(&e),
        }
    })
}

/// Storage-capacity estimate for feature dimension `d_phi`, inverse
/// temperature `beta`, probability knob `p`, and separation radius
/// `r_phi`.
///
/// # Safety
///
/// `out` must be a valid, writable pointer.
#[no_mangle]
pub unsafe extern "C" fn khop_capacity_bound(
    d_phi: usize,
    beta: f64,
    p: f64,
    r_phi: f64,
    out: *mut f64,
) -> KhopStatus {
    guard(|| {
        if out.is_null() {
            return fail(KhopStatus::NullPointer, "out is null");
        }
        match khop::capacity::capacity_bound(d_phi, beta, p, r_phi) {
            Ok(bound) => {
                unsafe { *out = bound.bound };
                KhopStatus::Ok
            }
            Err(e) => report(&e),
        }
    })
}

/// Principal branch of the Lambert W function at `x` (requires
/// `x >= -1/e`).
///
/// # Safety
///
/// `out` must be a valid, writable pointer.
#[no_mangle]
pub unsafe extern "C" fn khop_lambert_w0(x: f64, out: *mut f64) -> KhopStatus {
    guard(|| {
        if out.is_null() {
            return fail(KhopStatus::NullPointer, "out is null");
        }
        match khop::capacity::lambert_w0(x) {
            Ok(w) => {
                unsafe { *out = w };
                KhopStatus::Ok
            }
            Err(e) => report(&e),
        }
    })
}
