//! C ABI for the voldecon estimators.
//!
//! Every fallible function returns a [`VdStatus`]; on failure the message is
//! available from [`vd_last_error`] on the same thread. Output buffers are
//! caller-allocated. Kernels are opaque handles created by [`vd_kernel_new`]
//! and released with [`vd_kernel_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use voldecon::kerneldeconv::{estimate_with_kernel, DeconvKernel, DEFAULT_TABLE_DX};
use voldecon::noisemodel::{noise_charfn, noise_density};
use voldecon::ppe::{select_and_estimate, PpeConfig};
use voldecon::volreg::{regression_estimate, RegressionOptions};
use voldecon::wavelet::{wavelet_estimate, Level, Truncation, WaveletSpec};
use voldecon::{Error, NoiseModel};

/// Status codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Numeric = 3,
    TooSmall = 4,
    EmptySeries = 5,
    AllMasked = 6,
    GridMismatch = 7,
    Panic = 8,
    Other = 9,
}

impl From<&Error> for VdStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Parameter(_) | Error::Config(_) | Error::Unstable(_) | Error::Data(_) => VdStatus::InvalidParameter,
            Error::Numeric(_) | Error::Pole(_) | Error::Singularity(_) | Error::NonPositiveMass(_) => VdStatus::Numeric,
            Error::TooSmall(_) => VdStatus::TooSmall,
            Error::EmptySeries => VdStatus::EmptySeries,
            Error::AllMasked(_) => VdStatus::AllMasked,
            Error::GridMismatch(_) | Error::PathLength { .. } => VdStatus::GridMismatch,
            _ => VdStatus::Other,
        }
    }
}

/// Deconvolution kernel `v_h`, tabulated once and reusable across data sets.
pub struct VdKernel {
    inner: DeconvKernel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(VdStatus);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = VdStatus::from(&e);
        set_error(e.to_string());
        Fail(status)
    }
}

fn fail(status: VdStatus, msg: &str) -> Fail {
    set_error(msg.to_string());
    Fail(status)
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> VdStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VdStatus::Ok,
        Ok(Err(Fail(s))) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            VdStatus::Panic
        }
    }
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(VdStatus::NullPointer, &format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(VdStatus::NullPointer, &format!("{what} is null")));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn out_scalar<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| fail(VdStatus::NullPointer, &format!("{what} is null")))
}

fn noise(flag: i32) -> NoiseModel {
    if flag == 0 {
        NoiseModel::Absent
    } else {
        NoiseModel::LogChiSquare
    }
}

/// Message of the last failure on this thread, or null. Valid until the next
/// call into this library from the same thread.
#[no_mangle]
pub extern "C" fn vd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Density of `log Z²` at `x`.
#[no_mangle]
pub extern "C" fn vd_noise_density(x: f64) -> f64 {
    noise_density(x)
}

/// Characteristic function `E e^{it log Z²}`.
///
/// # Safety
/// `re` and `im` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vd_noise_charfn(t: f64, re: *mut f64, im: *mut f64) -> VdStatus {
    guard(|| {
        let v = noise_charfn(t);
        *out_scalar(re, "re")? = v.re;
        *out_scalar(im, "im")? = v.im;
        Ok(())
    })
}

/// Tabulates `v_h` on `[-x_max, x_max]`. `noise_flag = 0` drops the noise
/// (plain kernel), anything else uses `log χ²(1)` noise.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vd_kernel_new(h: f64, x_max: f64, noise_flag: i32, out: *mut *mut VdKernel) -> VdStatus {
    guard(|| {
        let slot = out_scalar(out, "out")?;
        *slot = ptr::null_mut();
        let inner = DeconvKernel::with_spacing(h, noise(noise_flag), x_max, DEFAULT_TABLE_DX)?;
        *slot = Box::into_raw(Box::new(VdKernel { inner }));
        Ok(())
    })
}

/// Releases a kernel; null is ignored.
///
/// # Safety
/// `kernel` must come from [`vd_kernel_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vd_kernel_free(kernel: *mut VdKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// `v_h(x)`, zero beyond the tabulated range.
///
/// # Safety
/// `kernel` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vd_kernel_eval(kernel: *const VdKernel, x: f64, out: *mut f64) -> VdStatus {
    guard(|| {
        let k = kernel.as_ref().ok_or_else(|| fail(VdStatus::NullPointer, "kernel is null"))?;
        *out_scalar(out, "out")? = k.inner.eval(x);
        Ok(())
    })
}

/// Kernel density estimate `f_nh` of `y` at the `m` grid points (raw,
/// possibly negative).
///
/// # Safety
/// `y` holds `n` values, `grid` and `out` hold `m`; `kernel` is live.
#[no_mangle]
pub unsafe extern "C" fn vd_kernel_density(
    kernel: *const VdKernel,
    y: *const f64,
    n: usize,
    grid: *const f64,
    m: usize,
    out: *mut f64,
) -> VdStatus {
    guard(|| {
        let k = kernel.as_ref().ok_or_else(|| fail(VdStatus::NullPointer, "kernel is null"))?;
        let y = input(y, n, "y")?;
        let grid = input(grid, m, "grid")?;
        let out = output(out, m, "out")?;
        let report = estimate_with_kernel(y, &k.inner, grid.to_vec(), false)?;
        out.copy_from_slice(report.density.values());
        Ok(())
    })
}

/// Meyer-wavelet estimate. `level < 0` selects the level automatically and
/// `truncation = 0` means `L = n`; the level used is written to `level_out`
/// when it is not null.
///
/// # Safety
/// `y` holds `n` values, `grid` and `out` hold `m`.
#[no_mangle]
pub unsafe extern "C" fn vd_wavelet_density(
    y: *const f64,
    n: usize,
    level: i32,
    truncation: usize,
    grid: *const f64,
    m: usize,
    out: *mut f64,
    level_out: *mut i32,
) -> VdStatus {
    guard(|| {
        let y = input(y, n, "y")?;
        let grid = input(grid, m, "grid")?;
        let out = output(out, m, "out")?;
        let spec = WaveletSpec {
            level: if level < 0 { Level::Auto } else { Level::Fixed(level as u32) },
            truncation: if truncation == 0 { Truncation::SampleSize } else { Truncation::Fixed(truncation) },
            ..WaveletSpec::default()
        };
        let est = wavelet_estimate(y, &spec, Some(grid))?;
        out.copy_from_slice(est.density.values());
        if let Some(l) = level_out.as_mut() {
            *l = est.level as i32;
        }
        Ok(())
    })
}

/// Penalized projection estimate with adaptive level. `kn = 0` means
/// `K_n = n`; the selected level is written to `level_out` when not null.
///
/// # Safety
/// `y` holds `n` values, `grid` and `out` hold `m`.
#[no_mangle]
pub unsafe extern "C" fn vd_ppe_density(
    y: *const f64,
    n: usize,
    kappa: f64,
    kn: usize,
    grid: *const f64,
    m: usize,
    out: *mut f64,
    level_out: *mut usize,
) -> VdStatus {
    guard(|| {
        let y = input(y, n, "y")?;
        let grid = input(grid, m, "grid")?;
        let out = output(out, m, "out")?;
        let cfg = PpeConfig { kappa, kn: (kn > 0).then_some(kn), ..PpeConfig::default() };
        let est = select_and_estimate(y, &cfg, grid)?;
        out.copy_from_slice(est.density.values());
        if let Some(l) = level_out.as_mut() {
            *l = est.selected_level();
        }
        Ok(())
    })
}

/// Deconvolution regression of `Y_{j+1}` on `Y_j`. Masked points get
/// `mhat = NaN` and `masked = 1`. `center != 0` removes `E log Z²` from the
/// responses.
///
/// # Safety
/// `y` holds `n` values; `grid`, `mhat`, `fhat` and `masked` hold `m`.
#[no_mangle]
pub unsafe extern "C" fn vd_regression(
    y: *const f64,
    n: usize,
    h: f64,
    denominator_floor: f64,
    center: i32,
    grid: *const f64,
    m: usize,
    mhat: *mut f64,
    fhat: *mut f64,
    masked: *mut u8,
) -> VdStatus {
    guard(|| {
        let y = input(y, n, "y")?;
        let grid = input(grid, m, "grid")?;
        let mhat = output(mhat, m, "mhat")?;
        let fhat = output(fhat, m, "fhat")?;
        let masked = output(masked, m, "masked")?;
        let opts =
            RegressionOptions { denominator_floor, center_response: center != 0, ..RegressionOptions::default() };
        let est = regression_estimate(y, h, grid, &opts)?;
        mhat.copy_from_slice(&est.mhat);
        fhat.copy_from_slice(&est.denominator);
        for (dst, src) in masked.iter_mut().zip(&est.masked) {
            *dst = u8::from(*src);
        }
        Ok(())
    })
}
