//! C interface to `sse-denoise`.
//!
//! Blocks are opaque handles created by [`sse_block_new`] or returned by the
//! processing functions, and released with [`sse_block_free`]. Every function
//! that can fail returns an [`SseStatus`]; the message of the last failure on
//! the calling thread is available from [`sse_last_error_message`]. Panics are
//! caught at the boundary and reported as [`SseStatus::Panic`].
//!
//! Sample buffers are row-major: gate `k` of signal `m` sits at
//! `data[k * signals + m]`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sse_denoise::baselines::{ls_fit, retrack, svd_filter_chunked};
use sse_denoise::metrics::rsnr;
use sse_denoise::signal_model::brown_waveform;
use sse_denoise::solver::SUpdate;
use sse_denoise::{denoise_stream, BrownConstants, BrownParams, Error, SignalBlock, SolverConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SseStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

/// Opaque K×M block of waveform samples.
pub struct SseBlock {
    inner: SignalBlock,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SseSolverConfig {
    pub zeta: f64,
    pub eta: f64,
    pub xi: f64,
    pub t_max: u32,
    pub lengthscale: f64,
    pub jitter: f64,
    /// Solve the signal update densely instead of in the eigenbasis.
    pub dense: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SseBrownConstants {
    pub alpha: f64,
    pub sigma_p: f64,
    pub c: f64,
    pub gate_resolution: f64,
    pub num_gates: u32,
}

/// SWH (m), epoch τ (m), amplitude Pu.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SseBrownParams {
    pub swh: f64,
    pub tau: f64,
    pub pu: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SseFitResult {
    pub params: SseBrownParams,
    pub residual_norm: f64,
    pub iterations: u32,
    pub converged: bool,
}

struct Failure {
    status: SseStatus,
    message: String,
}

impl Failure {
    fn new(status: SseStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn null(name: &str) -> Self {
        Self::new(SseStatus::NullPointer, format!("{name} is null"))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::ShapeMismatch { .. } => SseStatus::ShapeMismatch,
            Error::Io { .. } | Error::Format { .. } => SseStatus::Io,
            e if e.is_numerical() => SseStatus::Numerical,
            _ => SseStatus::InvalidArgument,
        };
        Self::new(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SseStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            SseStatus::Ok
        }
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            SseStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    // SAFETY: caller passes a pointer that is either null or valid for reads.
    unsafe { p.as_ref() }.ok_or_else(|| Failure::null(name))
}

unsafe fn as_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: caller passes a pointer that is either null or valid for writes.
    unsafe { p.as_mut() }.ok_or_else(|| Failure::null(name))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::null(name));
    }
    // SAFETY: caller guarantees `len` readable doubles at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(Failure::null(name));
    }
    // SAFETY: caller guarantees `len` writable doubles at `p`.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

fn hand_out(block: SignalBlock, out: &mut *mut SseBlock) {
    *out = Box::into_raw(Box::new(SseBlock { inner: block }));
}

impl From<SseBrownParams> for BrownParams {
    fn from(p: SseBrownParams) -> Self {
        BrownParams::new(p.swh, p.tau, p.pu)
    }
}

impl From<BrownParams> for SseBrownParams {
    fn from(p: BrownParams) -> Self {
        Self {
            swh: p.swh,
            tau: p.tau,
            pu: p.pu,
        }
    }
}

impl From<BrownConstants> for SseBrownConstants {
    fn from(c: BrownConstants) -> Self {
        Self {
            alpha: c.alpha,
            sigma_p: c.sigma_p,
            c: c.c,
            gate_resolution: c.gate_resolution,
            num_gates: c.num_gates as u32,
        }
    }
}

fn constants(c: &SseBrownConstants) -> Result<BrownConstants, Failure> {
    let consts = BrownConstants {
        alpha: c.alpha,
        sigma_p: c.sigma_p,
        c: c.c,
        gate_resolution: c.gate_resolution,
        num_gates: c.num_gates as usize,
    };
    consts.validate()?;
    Ok(consts)
}

fn solver_config(c: &SseSolverConfig) -> SolverConfig {
    SolverConfig {
        zeta: c.zeta,
        eta: c.eta,
        xi: c.xi,
        t_max: c.t_max as usize,
        lengthscale: c.lengthscale,
        jitter: c.jitter,
        s_update: if c.dense { SUpdate::Dense } else { SUpdate::Spectral },
        ..SolverConfig::default()
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sse_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn sse_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sse_solver_config_default(out: *mut SseSolverConfig) -> SseStatus {
    guard(|| {
        let out = unsafe { as_mut(out, "out")? };
        let d = SolverConfig::default();
        *out = SseSolverConfig {
            zeta: d.zeta,
            eta: d.eta,
            xi: d.xi,
            t_max: d.t_max as u32,
            lengthscale: d.lengthscale,
            jitter: d.jitter,
            dense: d.s_update == SUpdate::Dense,
        };
        Ok(())
    })
}

/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sse_brown_constants_default(out: *mut SseBrownConstants) -> SseStatus {
    guard(|| {
        *unsafe { as_mut(out, "out")? } = BrownConstants::jason2_like().into();
        Ok(())
    })
}

/// Creates a block from `gates * signals` row-major samples, or a zero block
/// when `data` is NULL.
///
/// # Safety
/// `data` must be null or point to `gates * signals` readable doubles; `out`
/// must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sse_block_new(
    gates: usize,
    signals: usize,
    data: *const f64,
    out: *mut *mut SseBlock,
) -> SseStatus {
    guard(|| {
        let out = unsafe { as_mut(out, "out")? };
        let len = gates
            .checked_mul(signals)
            .ok_or_else(|| Failure::new(SseStatus::InvalidArgument, "block size overflows"))?;
        let block = if data.is_null() {
            SignalBlock::zeros(gates, signals)
        } else {
            SignalBlock::from_row_major(gates, signals, unsafe { slice(data, len, "data")? }.to_vec())?
        };
        hand_out(block, out);
        Ok(())
    })
}

/// # Safety
/// `block` must be null or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sse_block_free(block: *mut SseBlock) {
    if !block.is_null() {
        // SAFETY: the handle came from Box::into_raw in this library.
        drop(unsafe { Box::from_raw(block) });
    }
}

/// # Safety
/// `block` must be a live handle; `gates` and `signals` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sse_block_dims(block: *const SseBlock, gates: *mut usize, signals: *mut usize) -> SseStatus {
    guard(|| {
        let b = unsafe { as_ref(block, "block")? };
        let (k, m) = b.inner.shape();
        *unsafe { as_mut(gates, "gates")? } = k;
        *unsafe { as_mut(signals, "signals")? } = m;
        Ok(())
    })
}

/// Copies the samples, row-major, into `out`, which holds `len` doubles.
///
/// # Safety
/// `block` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sse_block_copy(block: *const SseBlock, out: *mut f64, len: usize) -> SseStatus {
    guard(|| {
        let b = unsafe { as_ref(block, "block")? };
        let src = b.inner.as_slice();
        if len != src.len() {
            return Err(Failure::new(
                SseStatus::ShapeMismatch,
                format!("buffer holds {len} values, block has {}", src.len()),
            ));
        }
        unsafe { slice_mut(out, len, "out")? }.copy_from_slice(src);
        Ok(())
    })
}

/// Denoises `y` in chunks of `chunk` signals. `config` may be NULL for defaults.
///
/// # Safety
/// `y` must be a live handle, `config` null or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sse_denoise(
    y: *const SseBlock,
    chunk: usize,
    config: *const SseSolverConfig,
    out: *mut *mut SseBlock,
) -> SseStatus {
    guard(|| {
        let y = unsafe { as_ref(y, "y")? };
        let out = unsafe { as_mut(out, "out")? };
        let cfg = match unsafe { config.as_ref() } {
            Some(c) => solver_config(c),
            None => SolverConfig::default(),
        };
        let result = denoise_stream(&y.inner, chunk, &cfg)?;
        hand_out(result.s_hat, out);
        Ok(())
    })
}

/// Truncated-SVD filter over chunks of `chunk` signals.
///
/// # Safety
/// `y` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sse_svd_filter(
    y: *const SseBlock,
    energy_threshold: f64,
    chunk: usize,
    out: *mut *mut SseBlock,
) -> SseStatus {
    guard(|| {
        let y = unsafe { as_ref(y, "y")? };
        let out = unsafe { as_mut(out, "out")? };
        hand_out(svd_filter_chunked(&y.inner, energy_threshold, chunk)?, out);
        Ok(())
    })
}

/// Reconstruction SNR in dB; +inf when the blocks are equal.
///
/// # Safety
/// `clean` and `estimate` must be live handles and `out_db` writable.
#[no_mangle]
pub unsafe extern "C" fn sse_rsnr(clean: *const SseBlock, estimate: *const SseBlock, out_db: *mut f64) -> SseStatus {
    guard(|| {
        let clean = unsafe { as_ref(clean, "clean")? };
        let est = unsafe { as_ref(estimate, "estimate")? };
        *unsafe { as_mut(out_db, "out_db")? } = rsnr(&clean.inner, &est.inner)?;
        Ok(())
    })
}

/// Writes the `num_gates` samples of the Brown model into `out`.
///
/// # Safety
/// `consts` and `params` must be readable; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sse_brown_waveform(
    consts: *const SseBrownConstants,
    params: *const SseBrownParams,
    out: *mut f64,
    len: usize,
) -> SseStatus {
    guard(|| {
        let consts = constants(unsafe { as_ref(consts, "consts")? })?;
        let params: BrownParams = (*unsafe { as_ref(params, "params")? }).into();
        if len != consts.num_gates {
            return Err(Failure::new(
                SseStatus::ShapeMismatch,
                format!("buffer holds {len} values, model has {} gates", consts.num_gates),
            ));
        }
        let w = brown_waveform(&params, &consts)?;
        unsafe { slice_mut(out, len, "out")? }.copy_from_slice(w.samples());
        Ok(())
    })
}

/// Least-squares retracking of one waveform of `len` gates. With `init` NULL
/// the fit starts from the nominal point and falls back to a grid of epochs.
///
/// # Safety
/// `consts` readable, `y` holds `len` doubles, `init` null or readable,
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sse_ls_fit(
    consts: *const SseBrownConstants,
    y: *const f64,
    len: usize,
    init: *const SseBrownParams,
    out: *mut SseFitResult,
) -> SseStatus {
    guard(|| {
        let consts = constants(unsafe { as_ref(consts, "consts")? })?;
        let y = unsafe { slice(y, len, "y")? };
        let out = unsafe { as_mut(out, "out")? };
        let fit = match unsafe { init.as_ref() } {
            Some(p) => ls_fit(y, &consts, &(*p).into())?,
            None => retrack(y, &consts)?,
        };
        *out = SseFitResult {
            params: fit.params.into(),
            residual_norm: fit.residual_norm,
            iterations: fit.iterations as u32,
            converged: fit.converged,
        };
        Ok(())
    })
}
