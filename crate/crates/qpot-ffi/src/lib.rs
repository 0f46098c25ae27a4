//! C interface to the potential-theory library.
//!
//! Conventions, uniform across every entry point:
//!
//! * Handles (`QpotCompact`, `QpotExtremal`) are opaque; create them with
//!   the `_new`/`_solve` functions and release them with the matching
//!   `_free`. A `_free` accepts null and does nothing.
//! * Every fallible function returns a [`QpotStatus`]; outputs go through
//!   pointer arguments that are written only on `QPOT_OK`.
//! * On any failure the thread-local error message is set; read it with
//!   [`qpot_last_error`]. Panics never unwind across the boundary: they
//!   are caught and reported as `QPOT_ERR_PANIC`.
//! * All pointers must be valid for the duration of the call and, where
//!   noted, properly aligned arrays of the stated length. Nulls are
//!   rejected with `QPOT_ERR_NULL_ARGUMENT` rather than dereferenced.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use qpot::calc::OperatorTable;
use qpot::grid::Box4;
use qpot::poly::RealPolynomial;
use qpot::potential::{capacity, extremal_function, Ball, CompactSpec, ExtremalSolution};
use qpot::scalar::rat_to_f64;
use qpot::verify::{check_identities, check_identities_injected};
use qpot::QpotError;

/// Result of every fallible call in this interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpotStatus {
    /// The call succeeded and every output pointer was written.
    QpotOk = 0,
    /// A required pointer argument was null.
    QpotErrNullArgument = 1,
    /// An argument failed validation (dimension, range, or format).
    QpotErrInvalidArgument = 2,
    /// The compact set does not fit inside the domain ball.
    QpotErrCompactNotInside = 3,
    /// A matrix argument was not hyperhermitian.
    QpotErrNotHyperhermitian = 4,
    /// The obstacle solver hit its iteration budget before reaching the
    /// requested tolerance.
    QpotErrSolverStalled = 5,
    /// Reading or writing a file failed.
    QpotErrIo = 6,
    /// A string argument was not valid UTF-8.
    QpotErrUtf8 = 7,
    /// An internal invariant broke; the library caught the panic.
    QpotErrPanic = 8,
}

/// Capacity of a compact set together with its solver diagnostics.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct QpotCapacity {
    /// The Monge-Ampère mass of the extremal function.
    pub value: f64,
    /// Total relaxation sweeps across all warm-start levels.
    pub iterations: u64,
    /// Largest pointwise update in the final sweep.
    pub residual: f64,
    /// Fraction of the mass within three lattice steps of the set
    /// boundary (1 when the set is empty).
    pub near_boundary_fraction: f64,
}

/// A compact subset of the domain ball, built as a finite union of closed
/// balls. Opaque; see `qpot_compact_new`.
pub struct QpotCompact {
    balls: Vec<Ball>,
}

/// A solved extremal function on its lattice. Opaque; see
/// `qpot_extremal_solve`.
pub struct QpotExtremal {
    sol: ExtremalSolution,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized: String = message.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("nul bytes were stripped");
    });
}

fn status_of(e: &QpotError) -> QpotStatus {
    match e {
        QpotError::Dimension(_)
        | QpotError::Domain(_)
        | QpotError::Config(_)
        | QpotError::Parse(_) => QpotStatus::QpotErrInvalidArgument,
        QpotError::CompactNotInside(_) => QpotStatus::QpotErrCompactNotInside,
        QpotError::NotHyperhermitian(_) => QpotStatus::QpotErrNotHyperhermitian,
        QpotError::SolverStalled { .. } => QpotStatus::QpotErrSolverStalled,
        QpotError::Io(_) => QpotStatus::QpotErrIo,
    }
}

fn fail(e: &QpotError) -> QpotStatus {
    set_last_error(&e.to_string());
    status_of(e)
}

/// Run a closure, translating errors and panics into status codes.
fn guarded(f: impl FnOnce() -> Result<(), QpotStatus>) -> QpotStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QpotStatus::QpotOk,
        Ok(Err(status)) => status,
        Err(payload) => {
            let text = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unidentified panic".to_string());
            set_last_error(&format!("internal panic: {text}"));
            QpotStatus::QpotErrPanic
        }
    }
}

macro_rules! require_nonnull {
    ($ptr:expr, $name:literal) => {
        if $ptr.is_null() {
            set_last_error(concat!("argument `", $name, "` is null"));
            return Err(QpotStatus::QpotErrNullArgument);
        }
    };
}

/// Copy the most recent error message on this thread into `buf` as a
/// NUL-terminated string, truncating if `cap` is too small. Returns the
/// full message length in bytes, excluding the terminator; call with a
/// null `buf` or zero `cap` to query the length alone. The message is
/// replaced by the next failing call on the same thread.
///
/// # Safety
///
/// `buf` must either be null or point to at least `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn qpot_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
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

/// Monge-Ampère density of `|q|^2` in dimension `n`, the constant that
/// calibrates every density computation (8 for n = 1, 128 for n = 2).
/// Computed exactly and converted to double at the end.
///
/// # Safety
///
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn qpot_density_constant(n: usize, out: *mut f64) -> QpotStatus {
    guarded(|| {
        require_nonnull!(out, "out");
        if n == 0 || n > 4 {
            set_last_error("dimension must be between 1 and 4");
            return Err(QpotStatus::QpotErrInvalidArgument);
        }
        let mut u = RealPolynomial::zero(n);
        for m in 0..4 * n {
            let x = RealPolynomial::coord(n, m);
            u = u.add(&x.mul(&x));
        }
        let table = OperatorTable::new(n);
        let density = table.ma_density(&vec![u; n]).map_err(|e| fail(&e))?;
        let mut constant = 0.0;
        for (exps, coef) in density.terms() {
            if exps.iter().all(|&e| e == 0) {
                constant = rat_to_f64(&coef.re);
            }
        }
        unsafe { *out = constant };
        Ok(())
    })
}

/// Run the exact differential-identity suite over `count` random
/// polynomials in every dimension from 1 to `max_dimension`, writing the
/// worst signed margin (0 means every identity held exactly; negative
/// means a violation). `defect_id` may be null for a healthy operator
/// table, or one of the deliberate defect names
/// (`sign-flip-nabla00`, `drop-half-delta-ij`, `wrong-perm-sign`) to
/// demonstrate that the suite catches a broken table.
///
/// # Safety
///
/// `out_worst_margin` must point to a writable double; `defect_id` must
/// be null or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qpot_check_identities(
    seed: u64,
    count: usize,
    max_dimension: usize,
    defect_id: *const c_char,
    out_worst_margin: *mut f64,
) -> QpotStatus {
    guarded(|| {
        require_nonnull!(out_worst_margin, "out_worst_margin");
        if max_dimension == 0 || max_dimension > 4 {
            set_last_error("max_dimension must be between 1 and 4");
            return Err(QpotStatus::QpotErrInvalidArgument);
        }
        let dims: Vec<usize> = (1..=max_dimension).collect();
        let report = if defect_id.is_null() {
            check_identities(seed, count, &dims).map_err(|e| fail(&e))?
        } else {
            let text = unsafe { CStr::from_ptr(defect_id) }.to_str().map_err(|_| {
                set_last_error("defect_id is not valid UTF-8");
                QpotStatus::QpotErrUtf8
            })?;
            let defect = text.parse().map_err(|e: QpotError| fail(&e))?;
            check_identities_injected(seed, count, &dims, defect).map_err(|e| fail(&e))?
        };
        unsafe { *out_worst_margin = report.worst_margin };
        Ok(())
    })
}

/// Create an empty compact set. Add balls with `qpot_compact_add_ball`;
/// release with `qpot_compact_free`. Returns null only if allocation
/// fails inside the library.
#[no_mangle]
pub extern "C" fn qpot_compact_new() -> *mut QpotCompact {
    Box::into_raw(Box::new(QpotCompact { balls: Vec::new() }))
}

/// Add the closed ball with the given center and radius to the union.
///
/// # Safety
///
/// `compact` must be a live handle from `qpot_compact_new`; `center`
/// must point to 4 readable doubles.
#[no_mangle]
pub unsafe extern "C" fn qpot_compact_add_ball(
    compact: *mut QpotCompact,
    center: *const f64,
    radius: f64,
) -> QpotStatus {
    guarded(|| {
        require_nonnull!(compact, "compact");
        require_nonnull!(center, "center");
        let c = unsafe { std::slice::from_raw_parts(center, 4) };
        let ball = Ball::new([c[0], c[1], c[2], c[3]], radius).map_err(|e| fail(&e))?;
        unsafe { &mut *compact }.balls.push(ball);
        Ok(())
    })
}

/// Release a compact set handle. Null is accepted and ignored.
///
/// # Safety
///
/// `compact` must be null or a handle from `qpot_compact_new` that has
/// not been freed already.
#[no_mangle]
pub unsafe extern "C" fn qpot_compact_free(compact: *mut QpotCompact) {
    if !compact.is_null() {
        drop(unsafe { Box::from_raw(compact) });
    }
}

fn spec_of(compact: &QpotCompact) -> CompactSpec {
    CompactSpec::Balls(compact.balls.clone())
}

/// Capacity of the compact set relative to the origin-centered domain
/// ball of radius `omega_radius`, solved on a lattice with `resolution`
/// cells per axis (odd, at least 5) to the given solver tolerance.
///
/// # Safety
///
/// `compact` must be a live handle; `out` must point to a writable
/// `QpotCapacity`.
#[no_mangle]
pub unsafe extern "C" fn qpot_capacity(
    compact: *const QpotCompact,
    omega_radius: f64,
    resolution: usize,
    tolerance: f64,
    out: *mut QpotCapacity,
) -> QpotStatus {
    guarded(|| {
        require_nonnull!(compact, "compact");
        require_nonnull!(out, "out");
        let spec = spec_of(unsafe { &*compact });
        let geom = Box4::new([0.0; 4], omega_radius, resolution).map_err(|e| fail(&e))?;
        let cv = capacity(&spec, omega_radius, geom, tolerance).map_err(|e| fail(&e))?;
        unsafe {
            *out = QpotCapacity {
                value: cv.value,
                iterations: cv.iterations,
                residual: cv.residual,
                near_boundary_fraction: cv.near_boundary_fraction,
            };
        }
        Ok(())
    })
}

/// Solve the obstacle problem for the compact set and return a handle to
/// the extremal function. Release with `qpot_extremal_free`.
///
/// # Safety
///
/// `compact` must be a live handle; `out` must point to a writable
/// handle slot.
#[no_mangle]
pub unsafe extern "C" fn qpot_extremal_solve(
    compact: *const QpotCompact,
    omega_radius: f64,
    resolution: usize,
    tolerance: f64,
    out: *mut *mut QpotExtremal,
) -> QpotStatus {
    guarded(|| {
        require_nonnull!(compact, "compact");
        require_nonnull!(out, "out");
        let spec = spec_of(unsafe { &*compact });
        let geom = Box4::new([0.0; 4], omega_radius, resolution).map_err(|e| fail(&e))?;
        let sol = extremal_function(&spec, omega_radius, geom, tolerance).map_err(|e| fail(&e))?;
        unsafe { *out = Box::into_raw(Box::new(QpotExtremal { sol })) };
        Ok(())
    })
}

/// Value of the extremal function at the lattice cell nearest to `point`.
///
/// # Safety
///
/// `handle` must be a live handle from `qpot_extremal_solve`; `point`
/// must point to 4 readable doubles; `out` to a writable double.
#[no_mangle]
pub unsafe extern "C" fn qpot_extremal_value(
    handle: *const QpotExtremal,
    point: *const f64,
    out: *mut f64,
) -> QpotStatus {
    guarded(|| {
        require_nonnull!(handle, "handle");
        require_nonnull!(point, "point");
        require_nonnull!(out, "out");
        let u = &unsafe { &*handle }.sol.u;
        let p = unsafe { std::slice::from_raw_parts(point, 4) };
        let geom = u.geom();
        let h = geom.spacing();
        let m = geom.resolution();
        let mut idx = [0usize; 4];
        for ax in 0..4 {
            let origin = geom.center()[ax] - geom.half_width();
            let j = ((p[ax] - origin) / h).round();
            if !(0.0..m as f64).contains(&j) {
                set_last_error("point lies outside the sampled box");
                return Err(QpotStatus::QpotErrInvalidArgument);
            }
            idx[ax] = j as usize;
        }
        unsafe { *out = u.value(geom.flat(idx)) };
        Ok(())
    })
}

/// Solver diagnostics of an extremal handle: total sweeps and the final
/// residual. Either output may be null to skip it.
///
/// # Safety
///
/// `handle` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn qpot_extremal_info(
    handle: *const QpotExtremal,
    out_iterations: *mut u64,
    out_residual: *mut f64,
) -> QpotStatus {
    guarded(|| {
        require_nonnull!(handle, "handle");
        let sol = &unsafe { &*handle }.sol;
        if !out_iterations.is_null() {
            unsafe { *out_iterations = sol.iterations };
        }
        if !out_residual.is_null() {
            unsafe { *out_residual = sol.residual };
        }
        Ok(())
    })
}

/// Write the extremal function to `path` in the library's grid format.
///
/// # Safety
///
/// `handle` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qpot_extremal_export(
    handle: *const QpotExtremal,
    path: *const c_char,
) -> QpotStatus {
    guarded(|| {
        require_nonnull!(handle, "handle");
        require_nonnull!(path, "path");
        let text = unsafe { CStr::from_ptr(path) }.to_str().map_err(|_| {
            set_last_error("path is not valid UTF-8");
            QpotStatus::QpotErrUtf8
        })?;
        let mut file = std::fs::File::create(text).map_err(|e| fail(&QpotError::Io(e)))?;
        unsafe { &*handle }.sol.u.export(&mut file).map_err(|e| fail(&e))?;
        Ok(())
    })
}

/// Release an extremal handle. Null is accepted and ignored.
///
/// # Safety
///
/// `handle` must be null or a handle from `qpot_extremal_solve` that has
/// not been freed already.
#[no_mangle]
pub unsafe extern "C" fn qpot_extremal_free(handle: *mut QpotExtremal) {
    if !handle.is_null() {
        drop(unsafe { Box::from_raw(handle) });
    }
}
