//! C interface to `freesub`.
//!
//! Every entry point returns an [`FsStatus`]. On anything other than
//! `FS_STATUS_OK` a message is kept per thread and can be read with
//! [`fs_last_error`]. Handles are opaque and must be released with the
//! matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use freesub::freeconv::{free_convolve, free_power, ConvolutionResult};
use freesub::measures::{GridSpec, Measure};
use freesub::{transforms, Error, C64};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidMeasure = 3,
    OutsideDomain = 4,
    NoConvergence = 5,
    /// Quadrature, tail fit, series or moment failure.
    Numerical = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Free convolution of two measures, with its diagnostics.
pub struct FsConvolution {
    inner: ConvolutionResult,
}

/// A probability measure on `[0, inf)`.
pub struct FsMeasure {
    inner: Measure,
}

/// Grid layout used by the convolution routines.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct FsGridSpec {
    pub x_max: f64,
    pub nodes: usize,
    pub fit_decades: f64,
    pub linear_to: f64,
}

impl From<GridSpec> for FsGridSpec {
    fn from(g: GridSpec) -> Self {
        FsGridSpec { x_max: g.x_max, nodes: g.nodes, fit_decades: g.fit_decades, linear_to: g.linear_to }
    }
}

impl From<FsGridSpec> for GridSpec {
    fn from(g: FsGridSpec) -> Self {
        GridSpec { x_max: g.x_max, nodes: g.nodes, fit_decades: g.fit_decades, linear_to: g.linear_to }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FsStatus {
    match e {
        Error::InvalidMeasure(_) => FsStatus::InvalidMeasure,
        Error::InvalidArgument(_) => FsStatus::InvalidArgument,
        Error::OutsideDomain(_) => FsStatus::OutsideDomain,
        Error::NoConvergence { .. } => FsStatus::NoConvergence,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => FsStatus::Io,
        _ => FsStatus::Numerical,
    }
}

fn fail(status: FsStatus, msg: impl Into<String>) -> FsStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, recording errors and turning panics into `FS_STATUS_PANIC`.
fn guard<F: FnOnce() -> Result<(), FsStatus>>(f: F) -> FsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FsStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(FsStatus::Panic, msg)
        }
    }
}

fn lift<T>(r: freesub::Result<T>) -> Result<T, FsStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, FsStatus> {
    p.as_ref().ok_or_else(|| fail(FsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, FsStatus> {
    p.as_mut().ok_or_else(|| fail(FsStatus::NullPointer, format!("{what} is null")))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn fs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn fs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn fs_grid_spec_default() -> FsGridSpec {
    GridSpec::default().into()
}

/// Parses a measure from `name:p1,p2` (e.g. `pareto:1.5,1`) or a JSON object.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_measure_parse(spec: *const c_char, out_measure: *mut *mut FsMeasure) -> FsStatus {
    guard(|| {
        let slot = out(out_measure, "out")?;
        *slot = ptr::null_mut();
        if spec.is_null() {
            return Err(fail(FsStatus::NullPointer, "spec is null"));
        }
        let s = CStr::from_ptr(spec).to_str().map_err(|_| fail(FsStatus::InvalidArgument, "spec is not UTF-8"))?;
        let m = if s.trim_start().starts_with('{') {
            serde_json::from_str::<Measure>(s).map_err(|e| fail(FsStatus::InvalidMeasure, e.to_string()))?
        } else {
            lift(s.parse::<Measure>())?
        };
        *slot = Box::into_raw(Box::new(FsMeasure { inner: m }));
        Ok(())
    })
}

/// # Safety
/// `m` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fs_measure_free(m: *mut FsMeasure) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Writes the label of `m` into `buf` (NUL-terminated). `needed` receives
/// the required size including the terminator.
///
/// # Safety
/// `buf` must hold `len` bytes or be null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn fs_measure_label(
    m: *const FsMeasure,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> FsStatus {
    guard(|| {
        let m = deref(m, "measure")?;
        let label = m.inner.label();
        let n = label.len() + 1;
        if let Some(needed) = needed.as_mut() {
            *needed = n;
        }
        if buf.is_null() || len < n {
            return Err(fail(FsStatus::BufferTooSmall, format!("label needs {n} bytes")));
        }
        ptr::copy_nonoverlapping(label.as_ptr(), buf.cast::<u8>(), label.len());
        *buf.add(label.len()) = 0;
        Ok(())
    })
}

/// `mu((y, inf))`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_measure_tail(m: *const FsMeasure, y: f64, value: *mut f64) -> FsStatus {
    guard(|| {
        *out(value, "value")? = deref(m, "measure")?.inner.tail(y);
        Ok(())
    })
}

/// Density at `x`, zero where none exists.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_measure_density(m: *const FsMeasure, x: f64, value: *mut f64) -> FsStatus {
    guard(|| {
        *out(value, "value")? = deref(m, "measure")?.inner.density(x);
        Ok(())
    })
}

/// Moment of order `j`, possibly infinite.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_measure_moment(m: *const FsMeasure, j: u32, value: *mut f64) -> FsStatus {
    guard(|| {
        *out(value, "value")? = deref(m, "measure")?.inner.moment(j);
        Ok(())
    })
}

/// Tail index, or NaN for measures with bounded support.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_measure_tail_index(m: *const FsMeasure, value: *mut f64) -> FsStatus {
    guard(|| {
        *out(value, "value")? = deref(m, "measure")?.inner.tail_index().unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Cauchy transform `G(z)` for `Im z > 0`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_cauchy(
    m: *const FsMeasure,
    re: f64,
    im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> FsStatus {
    guard(|| {
        let m = deref(m, "measure")?;
        let (r, i) = (out(out_re, "out_re")?, out(out_im, "out_im")?);
        let g = lift(transforms::cauchy(&m.inner, C64::new(re, im)))?;
        (*r, *i) = (g.re, g.im);
        Ok(())
    })
}

/// Voiculescu transform `phi(z)` on the cone where the inverse exists.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_voiculescu(
    m: *const FsMeasure,
    re: f64,
    im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> FsStatus {
    guard(|| {
        let m = deref(m, "measure")?;
        let (r, i) = (out(out_re, "out_re")?, out(out_im, "out_im")?);
        let v = lift(transforms::voiculescu(&m.inner, C64::new(re, im), 0))?;
        (*r, *i) = (v.phi.re, v.phi.im);
        Ok(())
    })
}

unsafe fn spec_or_default(spec: *const FsGridSpec) -> Result<GridSpec, FsStatus> {
    let g: GridSpec = spec.as_ref().map_or_else(GridSpec::default, |s| (*s).into());
    lift(g.validate())?;
    Ok(g)
}

fn boxed(r: ConvolutionResult) -> *mut FsConvolution {
    Box::into_raw(Box::new(FsConvolution { inner: r }))
}

/// `a boxplus b`. `spec` may be null for the default grid.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_convolve(
    a: *const FsMeasure,
    b: *const FsMeasure,
    spec: *const FsGridSpec,
    out_result: *mut *mut FsConvolution,
) -> FsStatus {
    guard(|| {
        let slot = out(out_result, "out")?;
        *slot = ptr::null_mut();
        let (a, b) = (deref(a, "a")?, deref(b, "b")?);
        let g = spec_or_default(spec)?;
        *slot = boxed(lift(free_convolve(&a.inner, &b.inner, &g))?);
        Ok(())
    })
}

/// `n`-fold free convolution power.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_free_power(
    m: *const FsMeasure,
    n: u32,
    spec: *const FsGridSpec,
    out_result: *mut *mut FsConvolution,
) -> FsStatus {
    guard(|| {
        let slot = out(out_result, "out")?;
        *slot = ptr::null_mut();
        let m = deref(m, "measure")?;
        let g = spec_or_default(spec)?;
        *slot = boxed(lift(free_power(&m.inner, n, &g))?);
        Ok(())
    })
}

/// # Safety
/// `r` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fs_convolution_free(r: *mut FsConvolution) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// A new measure handle holding the result law.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_convolution_measure(r: *const FsConvolution, out_measure: *mut *mut FsMeasure) -> FsStatus {
    guard(|| {
        let slot = out(out_measure, "out")?;
        let r = deref(r, "result")?;
        *slot = Box::into_raw(Box::new(FsMeasure { inner: r.inner.measure.clone() }));
        Ok(())
    })
}

/// Number of grid nodes, zero when the result is a point mass.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_convolution_len(r: *const FsConvolution, len: *mut usize) -> FsStatus {
    guard(|| {
        *out(len, "len")? = deref(r, "result")?.inner.grid().map_or(0, |g| g.nodes().len());
        Ok(())
    })
}

/// Copies nodes and density values into caller buffers of length `cap`.
///
/// # Safety
/// `x` and `f` must each hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn fs_convolution_grid(
    r: *const FsConvolution,
    x: *mut f64,
    f: *mut f64,
    cap: usize,
) -> FsStatus {
    guard(|| {
        let r = deref(r, "result")?;
        let g = r.inner.grid().ok_or_else(|| fail(FsStatus::InvalidArgument, "result has no grid"))?;
        let n = g.nodes().len();
        if cap < n {
            return Err(fail(FsStatus::BufferTooSmall, format!("grid has {n} nodes")));
        }
        if x.is_null() || f.is_null() {
            return Err(fail(FsStatus::NullPointer, "output buffer is null"));
        }
        ptr::copy_nonoverlapping(g.nodes().as_ptr(), x, n);
        ptr::copy_nonoverlapping(g.density_values().as_ptr(), f, n);
        Ok(())
    })
}

/// Mass defect and largest relative subordination residual.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_convolution_diagnostics(
    r: *const FsConvolution,
    mass_defect: *mut f64,
    max_residual: *mut f64,
) -> FsStatus {
    guard(|| {
        let r = deref(r, "result")?;
        *out(mass_defect, "mass_defect")? = r.inner.mass_defect;
        *out(max_residual, "max_residual")? = r.inner.diagnostics.max_residual;
        Ok(())
    })
}
