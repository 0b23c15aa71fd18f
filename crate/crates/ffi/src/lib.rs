//! C ABI over `rvol-core`.
//!
//! Every fallible function returns an [`RvolStatus`]; on failure a
//! description is available from [`rvol_last_error`] on the same thread.
//! Kernels are opaque [`RvolKernel`] handles released with
//! [`rvol_kernel_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rvol_core::bergomi::implied_vol;
use rvol_core::kernel::{l2_error_discrete, l2_error_exact, ExpSumKernel, Kernel, RoughKernel};
use rvol_core::mc::{price, McConfig, Payoff};
use rvol_core::quadrature::{build_systematic, truncate_factors, KernelConfig};
use rvol_core::schemes::{build_heston_scheme, GridSpec, HestonParams, HestonSchemeKind};
use rvol_core::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RvolStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Io = 4,
    Panic = 5,
}

impl From<&Error> for RvolStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) | Error::InvalidKernel(_) | Error::Config(_) | Error::Dimension(_) => {
                RvolStatus::InvalidArgument
            }
            Error::NoConvergence { .. } | Error::NotPsd { .. } => RvolStatus::Numerical,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => RvolStatus::Io,
        }
    }
}

/// Opaque exponential-sum kernel `Σ α_i e^{-ρ_i t}`.
pub struct RvolKernel(ExpSumKernel);

/// Rough Heston parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RvolHestonParams {
    pub v0: f64,
    pub theta: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub rho: f64,
    pub s0: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RvolPayoff {
    EuroCall = 0,
    Lookback = 1,
}

/// Monte Carlo estimate with its 95% half-width.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RvolMcResult {
    pub mean: f64,
    pub half_width_95: f64,
    pub wall_seconds: f64,
    pub paths: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard<F: FnOnce() -> Result<(), (RvolStatus, String)>>(f: F) -> RvolStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RvolStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            RvolStatus::Panic
        }
    }
}

fn core<T>(r: rvol_core::Result<T>) -> Result<T, (RvolStatus, String)> {
    r.map_err(|e| (RvolStatus::from(&e), e.to_string()))
}

fn null(what: &str) -> (RvolStatus, String) {
    (RvolStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (RvolStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        (
            RvolStatus::InvalidArgument,
            format!("{what} is not valid UTF-8"),
        )
    })
}

unsafe fn kernel_ref<'a>(k: *const RvolKernel) -> Result<&'a ExpSumKernel, (RvolStatus, String)> {
    k.as_ref().map(|k| &k.0).ok_or_else(|| null("kernel"))
}

unsafe fn emit_kernel(k: ExpSumKernel, out: *mut *mut RvolKernel) {
    *out = Box::into_raw(Box::new(RvolKernel(k)));
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn rvol_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rvol_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a kernel from a JSON description such as
/// `{"hurst": 0.1, "method": "systematic", "n": 100}`.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rvol_kernel_from_json(
    config_json: *const c_char,
    out: *mut *mut RvolKernel,
) -> RvolStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = core(KernelConfig::from_json(c_str(config_json, "config_json")?))?;
        emit_kernel(core(cfg.build())?, out);
        Ok(())
    })
}

/// Systematic kernel with `n` factors optimized over `[0, horizon]`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rvol_kernel_systematic(
    hurst: f64,
    n: usize,
    horizon: f64,
    out: *mut *mut RvolKernel,
) -> RvolStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = core(RoughKernel::new(hurst))?;
        emit_kernel(core(build_systematic(&spec, n, horizon))?, out);
        Ok(())
    })
}

/// Kernel from weights and rates (rates strictly increasing, both non-negative).
///
/// # Safety
/// `alpha` and `rho` must point to `len` readable doubles, `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rvol_kernel_new(
    alpha: *const f64,
    rho: *const f64,
    len: usize,
    out: *mut *mut RvolKernel,
) -> RvolStatus {
    guard(|| {
        if alpha.is_null() || rho.is_null() || out.is_null() {
            return Err(null("alpha, rho or out"));
        }
        let a = std::slice::from_raw_parts(alpha, len).to_vec();
        let r = std::slice::from_raw_parts(rho, len).to_vec();
        emit_kernel(core(ExpSumKernel::new(a, r))?, out);
        Ok(())
    })
}

/// Loads a kernel from an `alpha,rho` CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rvol_kernel_load(
    path: *const c_char,
    out: *mut *mut RvolKernel,
) -> RvolStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        emit_kernel(core(ExpSumKernel::load(c_str(path, "path")?))?, out);
        Ok(())
    })
}

/// Writes the kernel as an `alpha,rho` CSV file.
///
/// # Safety
/// `kernel` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rvol_kernel_save(
    kernel: *const RvolKernel,
    path: *const c_char,
) -> RvolStatus {
    guard(|| core(kernel_ref(kernel)?.save(c_str(path, "path")?)))
}

/// Number of factors, 0 for a null handle.
///
/// # Safety
/// `kernel` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn rvol_kernel_len(kernel: *const RvolKernel) -> usize {
    kernel.as_ref().map_or(0, |k| k.0.len())
}

/// Copies weights and rates into caller buffers of capacity `cap`.
///
/// # Safety
/// `alpha` and `rho` must point to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rvol_kernel_params(
    kernel: *const RvolKernel,
    alpha: *mut f64,
    rho: *mut f64,
    cap: usize,
) -> RvolStatus {
    guard(|| {
        let k = kernel_ref(kernel)?;
        if alpha.is_null() || rho.is_null() {
            return Err(null("alpha or rho"));
        }
        if cap < k.len() {
            return Err((
                RvolStatus::InvalidArgument,
                format!("buffer holds {cap} values, kernel has {}", k.len()),
            ));
        }
        ptr::copy_nonoverlapping(k.weights().as_ptr(), alpha, k.len());
        ptr::copy_nonoverlapping(k.rates().as_ptr(), rho, k.len());
        Ok(())
    })
}

/// `Ĝ(t)`.
///
/// # Safety
/// `kernel` must come from this library and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rvol_kernel_eval(
    kernel: *const RvolKernel,
    t: f64,
    out: *mut f64,
) -> RvolStatus {
    guard(|| {
        let k = kernel_ref(kernel)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = k.eval(t);
        Ok(())
    })
}

/// `ζ = ∫_0^t (G - Ĝ)²` against the rough kernel of index `hurst`.
///
/// # Safety
/// `kernel` must come from this library and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rvol_kernel_l2_error(
    kernel: *const RvolKernel,
    hurst: f64,
    t: f64,
    out: *mut f64,
) -> RvolStatus {
    guard(|| {
        let k = kernel_ref(kernel)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = core(l2_error_exact(&core(RoughKernel::new(hurst))?, k, t))?;
        Ok(())
    })
}

/// Discrete error `sqrt((T/N) Σ (Ĝ - G)²(kT/N))`.
///
/// # Safety
/// `kernel` must come from this library and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rvol_kernel_discrete_error(
    kernel: *const RvolKernel,
    hurst: f64,
    horizon: f64,
    steps: usize,
    out: *mut f64,
) -> RvolStatus {
    guard(|| {
        let k = kernel_ref(kernel)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = core(l2_error_discrete(
            &core(RoughKernel::new(hurst))?,
            k,
            horizon,
            steps,
        ))?;
        Ok(())
    })
}

/// Keeps the first `ñ` factors whose discarded tail at lag `horizon/steps`
/// is at most `(horizon/steps)^beta`. Writes a new handle and `ñ`.
///
/// # Safety
/// `kernel` must come from this library; `out` and `n_tilde` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rvol_kernel_truncate(
    kernel: *const RvolKernel,
    horizon: f64,
    steps: usize,
    beta: f64,
    out: *mut *mut RvolKernel,
    n_tilde: *mut usize,
) -> RvolStatus {
    guard(|| {
        let k = kernel_ref(kernel)?;
        if out.is_null() || n_tilde.is_null() {
            return Err(null("out or n_tilde"));
        }
        let (t, m) = core(truncate_factors(k, horizon, steps, beta))?;
        *n_tilde = m;
        emit_kernel(t, out);
        Ok(())
    })
}

/// Releases a kernel handle; null is ignored.
///
/// # Safety
/// `kernel` must be null or an unreleased handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rvol_kernel_free(kernel: *mut RvolKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Monte Carlo price under rough Heston. `scheme` is one of `volterra`,
/// `multifactor`, `multifactor-truncated`, `hybrid`, `integrated-volterra`,
/// `integrated-multifactor`; `kernel` may be null for the Volterra schemes.
///
/// # Safety
/// Pointers must be valid; `scheme` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rvol_heston_price(
    params: *const RvolHestonParams,
    hurst: f64,
    kernel: *const RvolKernel,
    scheme: *const c_char,
    payoff: RvolPayoff,
    strike: f64,
    horizon: f64,
    steps: usize,
    beta: f64,
    paths: u64,
    seed: u64,
    workers: usize,
    out: *mut RvolMcResult,
) -> RvolStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let kind: HestonSchemeKind = core(c_str(scheme, "scheme")?.parse())?;
        let placeholder;
        let k = if kernel.is_null() {
            if kind.uses_factors() {
                return Err(null("kernel"));
            }
            placeholder = core(ExpSumKernel::new(vec![1.0], vec![0.0]))?;
            &placeholder
        } else {
            kernel_ref(kernel)?
        };
        let hp = core(HestonParams::new(
            p.v0, p.theta, p.lambda, p.sigma, p.rho, p.s0,
        ))?;
        let grid = core(GridSpec::new(horizon, steps))?;
        let s = core(build_heston_scheme(kind, hp, hurst, k, grid, beta))?;
        let pay = match payoff {
            RvolPayoff::EuroCall => Payoff::EuroCall { strike },
            RvolPayoff::Lookback => Payoff::Lookback { strike },
        };
        let r = core(price(
            &s,
            pay,
            &core(McConfig::new(paths, seed, workers.max(1)))?,
        ))?;
        *out = RvolMcResult {
            mean: r.mean,
            half_width_95: r.half_width_95,
            wall_seconds: r.wall_seconds,
            paths: r.paths,
        };
        Ok(())
    })
}

/// Black–Scholes implied volatility of a call price (zero rates).
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rvol_implied_vol(
    call_price: f64,
    s0: f64,
    strike: f64,
    t: f64,
    out: *mut f64,
) -> RvolStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = core(implied_vol(call_price, s0, strike, t))?;
        Ok(())
    })
}
