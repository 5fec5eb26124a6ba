//! C ABI for the dekreg estimators.
//!
//! Conventions:
//! - Datasets are opaque handles created by [`dekreg_dataset_new`] and
//!   released by [`dekreg_dataset_free`].
//! - Every fallible call returns a [`DekregStatus`]; results come back
//!   through out-pointers that are written only on `DEKREG_STATUS_OK`.
//! - After a non-OK status, [`dekreg_last_error_message`] returns a
//!   thread-local, NUL-terminated description of the failure.
//!
//! The committed header lives at `include/dekreg.h`; rebuild it with
//! `cargo build -p dekreg-ffi --features generate-header`.

use std::cell::RefCell;
use std::os::raw::c_char;

use dekreg::bandwidth::{loocv_select, rot_bandwidth, BandwidthGrid};
use dekreg::error::Error;
use dekreg::growth;
use dekreg::kernel::Kernel;
use dekreg::localfit::{Dataset, FitMethod};

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_last_error(msg: &str) {
    LAST_ERROR.with(|cell| {
        let mut buf = cell.borrow_mut();
        buf.clear();
        buf.extend_from_slice(msg.as_bytes());
        buf.push(0);
    });
}

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DekregStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// Arguments violate a documented precondition.
    InvalidArgument = 2,
    /// The estimator is undefined at the requested point (empty kernel
    /// neighborhood or singular local system).
    Undefined = 3,
    /// A numeric procedure failed (non-convergence, domain error,
    /// estimation or selection failure).
    NumericError = 4,
}

fn status_of(err: &Error) -> DekregStatus {
    match err {
        Error::UndefinedAtPoint { .. } => DekregStatus::Undefined,
        Error::InvalidInput(_) | Error::Csv { .. } | Error::Io { .. } => {
            DekregStatus::InvalidArgument
        }
        _ => DekregStatus::NumericError,
    }
}

fn fail(err: Error) -> DekregStatus {
    let status = status_of(&err);
    set_last_error(&err.to_string());
    status
}

fn fail_null(what: &str) -> DekregStatus {
    set_last_error(&format!("{what} must not be NULL"));
    DekregStatus::NullArgument
}

/// Kernel choices exposed through the C ABI.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DekregKernel {
    Gaussian = 0,
    Epanechnikov = 1,
}

impl DekregKernel {
    fn build(self) -> Kernel {
        match self {
            DekregKernel::Gaussian => Kernel::gaussian(),
            DekregKernel::Epanechnikov => Kernel::epanechnikov(),
        }
    }
}

/// Pointwise estimators exposed through the C ABI. `DE1` uses the `k` and
/// `lambda` arguments of the call; the polynomial methods ignore them.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DekregMethod {
    Nw = 0,
    Ll = 1,
    Lq = 2,
    Lc = 3,
    De1 = 4,
}

impl DekregMethod {
    fn build(self, k: usize, lambda: f64) -> FitMethod {
        match self {
            DekregMethod::Nw => FitMethod::LocalPoly { degree: 0 },
            DekregMethod::Ll => FitMethod::LocalPoly { degree: 1 },
            DekregMethod::Lq => FitMethod::LocalPoly { degree: 2 },
            DekregMethod::Lc => FitMethod::LocalPoly { degree: 3 },
            DekregMethod::De1 => FitMethod::De1 { k, lambda },
        }
    }
}

/// Opaque dataset handle.
pub struct DekregDataset {
    inner: Dataset,
}

/// Build a dataset from parallel arrays of length `len`. On success writes
/// a heap-owned handle to `out`; release it with [`dekreg_dataset_free`].
///
/// # Safety
/// `x` and `y` must point to `len` readable doubles; `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn dekreg_dataset_new(
    x: *const f64,
    y: *const f64,
    len: usize,
    out: *mut *mut DekregDataset,
) -> DekregStatus {
    if out.is_null() {
        return fail_null("out");
    }
    if x.is_null() || y.is_null() {
        return fail_null("x/y");
    }
    let xs = std::slice::from_raw_parts(x, len).to_vec();
    let ys = std::slice::from_raw_parts(y, len).to_vec();
    match Dataset::new(xs, ys) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(DekregDataset { inner }));
            DekregStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Release a dataset handle. NULL is a no-op.
///
/// # Safety
/// `dataset` must be NULL or a pointer returned by [`dekreg_dataset_new`]
/// that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn dekreg_dataset_free(dataset: *mut DekregDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of observations, or 0 for NULL.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dekreg_dataset_len(dataset: *const DekregDataset) -> usize {
    if dataset.is_null() {
        0
    } else {
        (*dataset).inner.len()
    }
}

/// Evaluate one pointwise estimator at `x0`.
///
/// # Safety
/// `dataset` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dekreg_fit_at(
    dataset: *const DekregDataset,
    method: DekregMethod,
    k: usize,
    lambda: f64,
    h: f64,
    kernel: DekregKernel,
    x0: f64,
    out: *mut f64,
) -> DekregStatus {
    if dataset.is_null() {
        return fail_null("dataset");
    }
    if out.is_null() {
        return fail_null("out");
    }
    let data = &(*dataset).inner;
    match method.build(k, lambda).fit_at(data, h, &kernel.build(), x0) {
        Ok(v) => {
            *out = v;
            DekregStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Evaluate an estimator over a grid of `grid_len` points. `out_values[i]`
/// receives the fitted value where `out_defined[i]` is 1, and NaN where it
/// is 0 (undefined neighborhood at that grid point).
///
/// # Safety
/// `dataset` must be a live handle; `grid` must hold `grid_len` readable
/// doubles; `out_values` and `out_defined` must hold `grid_len` writable
/// elements.
#[no_mangle]
pub unsafe extern "C" fn dekreg_fit_curve(
    dataset: *const DekregDataset,
    method: DekregMethod,
    k: usize,
    lambda: f64,
    h: f64,
    kernel: DekregKernel,
    grid: *const f64,
    grid_len: usize,
    out_values: *mut f64,
    out_defined: *mut u8,
) -> DekregStatus {
    if dataset.is_null() {
        return fail_null("dataset");
    }
    if grid.is_null() || out_values.is_null() || out_defined.is_null() {
        return fail_null("grid/out_values/out_defined");
    }
    let data = &(*dataset).inner;
    let grid = std::slice::from_raw_parts(grid, grid_len);
    match dekreg::localfit::fit_curve(data, &method.build(k, lambda), h, &kernel.build(), grid) {
        Ok(curve) => {
            for (i, v) in curve.values.iter().enumerate() {
                match v {
                    Some(v) => {
                        *out_values.add(i) = *v;
                        *out_defined.add(i) = 1;
                    }
                    None => {
                        *out_values.add(i) = f64::NAN;
                        *out_defined.add(i) = 0;
                    }
                }
            }
            DekregStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Half-median-spacing rule-of-thumb bandwidth.
///
/// # Safety
/// `dataset` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dekreg_rot_bandwidth(
    dataset: *const DekregDataset,
    out: *mut f64,
) -> DekregStatus {
    if dataset.is_null() {
        return fail_null("dataset");
    }
    if out.is_null() {
        return fail_null("out");
    }
    match rot_bandwidth(&(*dataset).inner) {
        Ok(h) => {
            *out = h;
            DekregStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Leave-one-out cross-validated bandwidth over the default grid. Writes
/// the winning bandwidth and its prediction-error score.
///
/// # Safety
/// `dataset` must be a live handle; `out_h` and `out_score` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dekreg_loocv_bandwidth(
    dataset: *const DekregDataset,
    method: DekregMethod,
    k: usize,
    lambda: f64,
    kernel: DekregKernel,
    out_h: *mut f64,
    out_score: *mut f64,
) -> DekregStatus {
    if dataset.is_null() {
        return fail_null("dataset");
    }
    if out_h.is_null() || out_score.is_null() {
        return fail_null("out_h/out_score");
    }
    let data = &(*dataset).inner;
    let selected = BandwidthGrid::default_for(data)
        .and_then(|grid| loocv_select(data, &method.build(k, lambda), &kernel.build(), &grid));
    match selected {
        Ok((h, score)) => {
            *out_h = h;
            *out_score = score;
            DekregStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Two-parameter exponential fit `y = c e^{lambda x}`.
///
/// # Safety
/// `dataset` must be a live handle; `out_c` and `out_lambda` valid
/// pointers.
#[no_mangle]
pub unsafe extern "C" fn dekreg_nls_exponential(
    dataset: *const DekregDataset,
    out_c: *mut f64,
    out_lambda: *mut f64,
) -> DekregStatus {
    if dataset.is_null() {
        return fail_null("dataset");
    }
    if out_c.is_null() || out_lambda.is_null() {
        return fail_null("out_c/out_lambda");
    }
    match growth::fit_nls_exponential(&(*dataset).inner) {
        Ok((c, lambda)) => {
            *out_c = c;
            *out_lambda = lambda;
            DekregStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Sub-exponential exponent estimate from the log-log regression slope.
///
/// # Safety
/// `dataset` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dekreg_estimate_alpha(
    dataset: *const DekregDataset,
    out: *mut f64,
) -> DekregStatus {
    if dataset.is_null() {
        return fail_null("dataset");
    }
    if out.is_null() {
        return fail_null("out");
    }
    match growth::estimate_alpha(&(*dataset).inner) {
        Ok(a) => {
            *out = a;
            DekregStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Growth-rate estimate for the sub-exponential law at a given alpha.
///
/// # Safety
/// `dataset` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dekreg_estimate_lambda_subexp(
    dataset: *const DekregDataset,
    alpha: f64,
    out: *mut f64,
) -> DekregStatus {
    if dataset.is_null() {
        return fail_null("dataset");
    }
    if out.is_null() {
        return fail_null("out");
    }
    match growth::estimate_lambda_subexp(&(*dataset).inner, alpha) {
        Ok(l) => {
            *out = l;
            DekregStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Copy the thread-local message for the most recent failure into `buf`
/// (NUL-terminated, truncated to `len`). Returns the full message length
/// including the terminator, or 0 when no error has occurred on this
/// thread.
///
/// # Safety
/// `buf` must be NULL (to query the length) or point to `len` writable
/// bytes.
#[no_mangle]
pub unsafe extern "C" fn dekreg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|cell| {
        let msg = cell.borrow();
        if msg.is_empty() {
            return 0;
        }
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}
