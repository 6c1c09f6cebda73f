//! C ABI for `sparsear`.
//!
//! Handles are opaque heap objects created by `sar_*` constructors and
//! released with the matching `*_free` function. Every fallible call returns
//! a [`SarStatus`]; on failure [`sar_last_error`] describes the cause for the
//! calling thread. Lags are 1-based; grid cell indices are 0-based.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sparsear::{
    fit_sar, fit_stvsar, fit_tvsar, seasonality_map, segment, GridSeries, ModelConfig, SarError, Solver,
    StvSarResult, Support, TimeSeries,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SarStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    TooShort = 3,
    NonFinite = 4,
    Numerical = 5,
    BufferTooSmall = 6,
    OutOfRange = 7,
    Masked = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SarSolver {
    Nnsp = 0,
    Mio = 1,
    MioDvp = 2,
}

/// Model settings. `tau0` is only read by `SAR_SOLVER_MIO_DVP` and is capped
/// at `order`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SarConfig {
    pub order: usize,
    pub sparsity: usize,
    pub solver: SarSolver,
    pub tau0: usize,
    pub big_m: f64,
}

/// Result of a single-series or segmented fit.
pub struct SarFit {
    blocks: Vec<Vec<f64>>,
    support: Support,
    objective: f64,
    gap: f64,
    certified: bool,
    nodes: usize,
}

pub struct SarGrid {
    inner: GridSeries,
}

pub struct SarGridFit {
    inner: StvSarResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &SarError) -> SarStatus {
    match err {
        SarError::TooShort { .. } | SarError::NoSegments { .. } => SarStatus::TooShort,
        SarError::NonFinite { .. } => SarStatus::NonFinite,
        SarError::Numerical(_) => SarStatus::Numerical,
        SarError::LagNotInSupport { .. } => SarStatus::OutOfRange,
        _ => SarStatus::InvalidArgument,
    }
}

fn fail(status: SarStatus, msg: impl Into<String>) -> SarStatus {
    set_error(msg);
    status
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard<F: FnOnce() -> Result<(), SarStatus>>(f: F) -> SarStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SarStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(SarStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: sparsear::Result<T>) -> Result<T, SarStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn slice<'a, T>(data: *const T, len: usize) -> Result<&'a [T], SarStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(fail(SarStatus::NullPointer, "null data pointer"));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn config(cfg: *const SarConfig) -> Result<ModelConfig, SarStatus> {
    let cfg = cfg
        .as_ref()
        .ok_or_else(|| fail(SarStatus::NullPointer, "null config"))?;
    let solver = match cfg.solver {
        SarSolver::Nnsp => Solver::Nnsp,
        SarSolver::Mio => Solver::Mio,
        SarSolver::MioDvp => Solver::MioDvp,
    };
    let mut model = ModelConfig::new(cfg.order, cfg.sparsity, solver).with_big_m(cfg.big_m);
    if solver == Solver::MioDvp {
        model = model.with_tau0(cfg.tau0.min(cfg.order));
    }
    lift(model.validate())?;
    Ok(model)
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), SarStatus> {
    if out.is_null() {
        return Err(fail(SarStatus::NullPointer, "null output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_into<T: Copy>(src: &[T], dst: *mut T, cap: usize) -> Result<(), SarStatus> {
    if cap < src.len() {
        return Err(fail(
            SarStatus::BufferTooSmall,
            format!("buffer holds {cap} items, {} needed", src.len()),
        ));
    }
    if src.is_empty() {
        return Ok(());
    }
    if dst.is_null() {
        return Err(fail(SarStatus::NullPointer, "null output buffer"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Fills `out` with the defaults: solver MIO, `big_m` 5, `tau0` 10.
///
/// # Safety
/// `out` must be null or point to writable memory for one `SarConfig`.
#[no_mangle]
pub unsafe extern "C" fn sar_config_default(out: *mut SarConfig) {
    if let Some(out) = out.as_mut() {
        *out = SarConfig {
            order: 1,
            sparsity: 1,
            solver: SarSolver::Mio,
            tau0: 10,
            big_m: sparsear::DEFAULT_BIG_M,
        };
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sar_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sar_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Fits one series.
///
/// # Safety
/// `values` must point to `len` doubles; `cfg` to a valid config; `out` to
/// writable storage for one pointer. Free the result with [`sar_fit_free`].
#[no_mangle]
pub unsafe extern "C" fn sar_fit_series(
    values: *const f64,
    len: usize,
    cfg: *const SarConfig,
    out: *mut *mut SarFit,
) -> SarStatus {
    guard(|| {
        let values = slice(values, len)?;
        let cfg = config(cfg)?;
        let series = lift(TimeSeries::new(values.to_vec()))?;
        let fit = lift(fit_sar(&series, &cfg))?;
        write_out(
            out,
            SarFit {
                objective: fit.objective,
                gap: fit.stats.gap,
                certified: fit.stats.certified,
                nodes: fit.stats.nodes_explored,
                support: fit.support,
                blocks: fit.blocks,
            },
        )
    })
}

/// Cuts the series into segments of `segment_length` and fits them on one
/// shared support. Each segment becomes one coefficient block.
///
/// # Safety
/// As [`sar_fit_series`].
#[no_mangle]
pub unsafe extern "C" fn sar_fit_segmented(
    values: *const f64,
    len: usize,
    segment_length: usize,
    cfg: *const SarConfig,
    out: *mut *mut SarFit,
) -> SarStatus {
    guard(|| {
        let values = slice(values, len)?;
        let cfg = config(cfg)?;
        let series = lift(TimeSeries::new(values.to_vec()))?;
        let segs = lift(segment(&series, segment_length))?;
        let res = lift(fit_tvsar(&segs, &cfg))?;
        write_out(
            out,
            SarFit {
                objective: res.objective,
                gap: res.stats.gap,
                certified: res.stats.certified,
                nodes: res.stats.nodes_explored,
                support: res.support,
                blocks: res.coefficients,
            },
        )
    })
}

/// # Safety
/// `fit` must come from a `sar_fit_*` constructor and not be freed yet; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sar_fit_free(fit: *mut SarFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sar_fit_objective(fit: *const SarFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.objective)
}

/// Optimality gap; infinite for the greedy solver.
///
/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sar_fit_gap(fit: *const SarFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.gap)
}

/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sar_fit_certified(fit: *const SarFit) -> bool {
    fit.as_ref().is_some_and(|f| f.certified)
}

/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sar_fit_nodes(fit: *const SarFit) -> usize {
    fit.as_ref().map_or(0, |f| f.nodes)
}

/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sar_fit_order(fit: *const SarFit) -> usize {
    fit.as_ref().and_then(|f| f.blocks.first()).map_or(0, Vec::len)
}

/// Number of coefficient blocks (1 for a single series, else segments).
///
/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sar_fit_block_count(fit: *const SarFit) -> usize {
    fit.as_ref().map_or(0, |f| f.blocks.len())
}

/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sar_fit_support_len(fit: *const SarFit) -> usize {
    fit.as_ref().map_or(0, |f| f.support.len())
}

/// Copies the 1-based support lags, ascending, into `lags[0..cap]`.
///
/// # Safety
/// `fit` must be a live handle; `lags` must hold `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn sar_fit_support(fit: *const SarFit, lags: *mut usize, cap: usize) -> SarStatus {
    guard(|| {
        let fit = fit.as_ref().ok_or_else(|| fail(SarStatus::NullPointer, "null fit"))?;
        copy_into(&fit.support.lags(), lags, cap)
    })
}

/// Copies block `block`'s length-`d` coefficients (index `k − 1` holds lag `k`).
///
/// # Safety
/// `fit` must be a live handle; `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn sar_fit_coefficients(
    fit: *const SarFit,
    block: usize,
    out: *mut f64,
    cap: usize,
) -> SarStatus {
    guard(|| {
        let fit = fit.as_ref().ok_or_else(|| fail(SarStatus::NullPointer, "null fit"))?;
        let w = fit
            .blocks
            .get(block)
            .ok_or_else(|| fail(SarStatus::OutOfRange, format!("block {block} out of range")))?;
        copy_into(w, out, cap)
    })
}

/// Creates an all-masked grid of `rows × cols` cells with `segments` segments
/// whose lengths are `segment_lengths[0..segments]`.
///
/// # Safety
/// `segment_lengths` must point to `segments` values; `out` to pointer storage.
#[no_mangle]
pub unsafe extern "C" fn sar_grid_new(
    rows: usize,
    cols: usize,
    segment_lengths: *const usize,
    segments: usize,
    out: *mut *mut SarGrid,
) -> SarStatus {
    guard(|| {
        let lengths = slice(segment_lengths, segments)?;
        let inner = lift(GridSeries::empty(rows, cols, lengths.to_vec()))?;
        write_out(out, SarGrid { inner })
    })
}

/// Stores the series of 0-based cell `(m, n, gamma)`.
///
/// # Safety
/// `grid` must be a live handle; `values` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sar_grid_set_cell(
    grid: *mut SarGrid,
    m: usize,
    n: usize,
    gamma: usize,
    values: *const f64,
    len: usize,
) -> SarStatus {
    guard(|| {
        let grid = grid.as_mut().ok_or_else(|| fail(SarStatus::NullPointer, "null grid"))?;
        let values = slice(values, len)?;
        let series = lift(TimeSeries::new(values.to_vec()))?;
        lift(grid.inner.set_cell(m, n, gamma, series))
    })
}

/// # Safety
/// `grid` must come from [`sar_grid_new`] and not be freed yet; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sar_grid_free(grid: *mut SarGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Two-stage grid fit: global support from pooled statistics, then per-cell
/// coefficients on it.
///
/// # Safety
/// `grid` must be a live handle, `cfg` a valid config, `out` pointer storage.
#[no_mangle]
pub unsafe extern "C" fn sar_fit_grid(
    grid: *const SarGrid,
    cfg: *const SarConfig,
    out: *mut *mut SarGridFit,
) -> SarStatus {
    guard(|| {
        let grid = grid.as_ref().ok_or_else(|| fail(SarStatus::NullPointer, "null grid"))?;
        let cfg = config(cfg)?;
        let inner = lift(fit_stvsar(&grid.inner, &cfg))?;
        write_out(out, SarGridFit { inner })
    })
}

/// # Safety
/// `fit` must come from [`sar_fit_grid`] and not be freed yet; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sar_grid_fit_free(fit: *mut SarGridFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sar_grid_fit_support_len(fit: *const SarGridFit) -> usize {
    fit.as_ref().map_or(0, |f| f.inner.support.len())
}

/// Copies the 1-based global support lags into `lags[0..cap]`.
///
/// # Safety
/// `fit` must be a live handle; `lags` must hold `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn sar_grid_fit_support(fit: *const SarGridFit, lags: *mut usize, cap: usize) -> SarStatus {
    guard(|| {
        let fit = fit.as_ref().ok_or_else(|| fail(SarStatus::NullPointer, "null fit"))?;
        copy_into(&fit.inner.support.lags(), lags, cap)
    })
}

/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sar_grid_fit_global_objective(fit: *const SarGridFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.inner.global_objective)
}

/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sar_grid_fit_certified(fit: *const SarGridFit) -> bool {
    fit.as_ref()
        .is_some_and(|f| f.inner.stage1.certified && f.inner.cells.iter().flatten().all(|c| c.certified))
}

/// Copies the coefficients of 0-based cell `(m, n, gamma)`, one per support
/// lag in ascending lag order. Returns `SAR_STATUS_MASKED` for masked cells.
///
/// # Safety
/// `fit` must be a live handle; `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn sar_grid_fit_cell(
    fit: *const SarGridFit,
    m: usize,
    n: usize,
    gamma: usize,
    out: *mut f64,
    cap: usize,
) -> SarStatus {
    guard(|| {
        let fit = &fit.as_ref().ok_or_else(|| fail(SarStatus::NullPointer, "null fit"))?.inner;
        let dims = fit.dims;
        if m >= dims.rows || n >= dims.cols || gamma >= dims.segments {
            return Err(fail(SarStatus::OutOfRange, "cell index outside the grid"));
        }
        let cell = fit
            .cell(m, n, gamma)
            .ok_or_else(|| fail(SarStatus::Masked, "cell is masked"))?;
        copy_into(&cell.coefficients, out, cap)
    })
}

/// Writes the coefficient of 1-based `lag` for every cell, in
/// `((m · cols) + n) · segments + gamma` order, NaN for masked cells.
/// `cap` must be at least `rows · cols · segments`.
///
/// # Safety
/// `fit` must be a live handle; `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn sar_grid_fit_seasonality(
    fit: *const SarGridFit,
    lag: usize,
    out: *mut f64,
    cap: usize,
) -> SarStatus {
    guard(|| {
        let fit = &fit.as_ref().ok_or_else(|| fail(SarStatus::NullPointer, "null fit"))?.inner;
        let map = lift(seasonality_map(fit, lag))?;
        let values: Vec<f64> = map.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        copy_into(&values, out, cap)
    })
}
