//! C interface to `nfdm-core`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` style
//! functions and released with the matching `*_free`. Every fallible call
//! returns an [`NfdmStatus`]; on failure the message is kept per thread and
//! can be read with [`nfdm_last_error`]. Panics are caught and reported as
//! [`NfdmStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use num_complex::Complex64;

use nfdm_core::harness::{run_point, with_workers, ExperimentConfig, Preset};
use nfdm_core::metrics::{channel_memory_symbols, rate_efficiency};
use nfdm_core::nft::{bnft, fnft_continuous};
use nfdm_core::{ComplexSignal, Error, FiberParams, LambdaGrid, NonlinearSpectrum, UnitsMode};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NfdmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnitsMismatch = 3,
    NonFinite = 4,
    GridMismatch = 5,
    UnrecoverableSpectrum = 6,
    SynthesisAccuracy = 7,
    StepTooLarge = 8,
    FrameMismatch = 9,
    Io = 10,
    Parse = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

impl From<&Error> for NfdmStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::InvalidField { .. } => NfdmStatus::InvalidArgument,
            Error::UnitsMismatch { .. } => NfdmStatus::UnitsMismatch,
            Error::NonFinite(_) => NfdmStatus::NonFinite,
            Error::GridMismatch(_) => NfdmStatus::GridMismatch,
            Error::UnrecoverableSpectrum => NfdmStatus::UnrecoverableSpectrum,
            Error::SynthesisAccuracy { .. } => NfdmStatus::SynthesisAccuracy,
            Error::StepTooLarge { .. } => NfdmStatus::StepTooLarge,
            Error::FrameMismatch(_) => NfdmStatus::FrameMismatch,
            Error::Io(_) => NfdmStatus::Io,
            Error::Parse(_) => NfdmStatus::Parse,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NfdmPreset {
    /// 2000 km link, 800 guard symbols.
    Paper = 0,
    /// 500 km link, 200 guard symbols.
    Fast = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NfdmComplex {
    pub re: f64,
    pub im: f64,
}

/// Performance of one operating point. `q_db_ber` is NaN when no bit
/// error was counted.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NfdmReport {
    pub q_db: f64,
    pub q_db_ber: f64,
    pub ber: f64,
    pub evm_snr_db: f64,
    pub symbols: u64,
    pub bit_errors: u64,
    pub repaired_points: u64,
    pub bursts: u64,
}

/// Opaque experiment configuration.
pub struct NfdmConfig(ExperimentConfig);

/// Opaque continuous nonlinear spectrum on the conjugate grid of a frame.
pub struct NfdmSpectrum(NonlinearSpectrum);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: NfdmStatus, msg: impl Into<String>) -> NfdmStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), NfdmStatus>) -> NfdmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NfdmStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(NfdmStatus::Panic, msg)
        }
    }
}

fn core<T>(r: nfdm_core::Result<T>) -> Result<T, NfdmStatus> {
    r.map_err(|e| fail((&e).into(), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), NfdmStatus> {
    if p.is_null() {
        Err(fail(NfdmStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, NfdmStatus> {
    non_null(p, what)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(NfdmStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Copies `text` plus a terminating NUL into `buf` if it fits; returns the
/// size needed including the NUL.
unsafe fn copy_str(text: &str, buf: *mut c_char, len: usize) -> usize {
    let bytes = text.as_bytes();
    if !buf.is_null() && len > bytes.len() {
        std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, bytes.len());
        *buf.add(bytes.len()) = 0;
    }
    bytes.len() + 1
}

unsafe fn write_str(
    text: &str,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> Result<(), NfdmStatus> {
    let n = copy_str(text, buf, len);
    if !needed.is_null() {
        *needed = n;
    }
    if buf.is_null() || len < n {
        return Err(fail(
            NfdmStatus::BufferTooSmall,
            format!("{n} bytes needed"),
        ));
    }
    Ok(())
}

/// Copies the message of the last failed call on this thread into `buf`
/// (NUL-terminated). Returns the size it needs, including the NUL; nothing
/// is written when `len` is smaller.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn nfdm_last_error(buf: *mut c_char, len: usize) -> usize {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    copy_str(&msg, buf, len)
}

/// Creates a configuration from a preset.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nfdm_config_new(
    preset: NfdmPreset,
    out: *mut *mut NfdmConfig,
) -> NfdmStatus {
    guard(|| {
        non_null(out, "out")?;
        let p = match preset {
            NfdmPreset::Paper => Preset::Paper,
            NfdmPreset::Fast => Preset::Fast,
        };
        *out = Box::into_raw(Box::new(NfdmConfig(ExperimentConfig::preset(p))));
        Ok(())
    })
}

/// Parses a configuration (JSON, or `key = value` lines) on top of the
/// paper preset.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nfdm_config_parse(
    text: *const c_char,
    out: *mut *mut NfdmConfig,
) -> NfdmStatus {
    guard(|| {
        non_null(out, "out")?;
        let text = str_arg(text, "text")?;
        let c = core(ExperimentConfig::parse(text, &ExperimentConfig::default()))?;
        core(c.validate())?;
        *out = Box::into_raw(Box::new(NfdmConfig(c)));
        Ok(())
    })
}

/// Sets one field by dotted key; the value is a JSON literal or a bare
/// string, e.g. `("launch_power_dbm", "-3")` or `("system", "dbp")`.
///
/// # Safety
/// `config` must come from this library; `key` and `value` must be
/// NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn nfdm_config_set(
    config: *mut NfdmConfig,
    key: *const c_char,
    value: *const c_char,
) -> NfdmStatus {
    guard(|| {
        non_null(config, "config")?;
        let pair = [(
            str_arg(key, "key")?.to_string(),
            str_arg(value, "value")?.to_string(),
        )];
        let updated = core((*config).0.with_overrides(&pair))?;
        core(updated.validate())?;
        (*config).0 = updated;
        Ok(())
    })
}

/// Writes the configuration as JSON. See [`nfdm_last_error`] for the
/// buffer protocol; `needed` may be null.
///
/// # Safety
/// `config` must come from this library; `buf` must be null or point to
/// `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn nfdm_config_to_json(
    config: *const NfdmConfig,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> NfdmStatus {
    guard(|| {
        non_null(config, "config")?;
        let json = core(serde_json::to_string(&(*config).0).map_err(Error::from))?;
        write_str(&json, buf, len, needed)
    })
}

/// # Safety
/// `config` must be null or come from this library, and is invalid
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn nfdm_config_free(config: *mut NfdmConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the configured operating point. `workers = 0` uses every core.
///
/// # Safety
/// `config` must come from this library and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nfdm_run_point(
    config: *const NfdmConfig,
    workers: usize,
    out: *mut NfdmReport,
) -> NfdmStatus {
    guard(|| {
        non_null(config, "config")?;
        non_null(out, "out")?;
        let c = &(*config).0;
        let workers = (workers > 0).then_some(workers);
        let r = core(with_workers(workers, || run_point(c)).and_then(|r| r))?;
        *out = NfdmReport {
            q_db: r.report.q_db,
            q_db_ber: r.report.q_db_ber.unwrap_or(f64::NAN),
            ber: r.report.ber,
            evm_snr_db: r.report.evm_snr_db,
            symbols: r.report.symbols_counted,
            bit_errors: r.report.errors_counted,
            repaired_points: r.report.repaired_spectrum_points,
            bursts: r.bursts as u64,
        };
        Ok(())
    })
}

unsafe fn normalized_signal(
    samples: *const NfdmComplex,
    n: usize,
    dt: f64,
    t_start: f64,
) -> Result<ComplexSignal, NfdmStatus> {
    non_null(samples, "samples")?;
    let x = std::slice::from_raw_parts(samples, n)
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect();
    core(ComplexSignal::new(x, dt, t_start, UnitsMode::Normalized))
}

/// Forward NFT of a normalized signal (`n` samples spaced `dt`, first at
/// `t_start`) on the conjugate grid `λ_k = -π k / (n dt)`.
///
/// # Safety
/// `samples` must point to `n` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nfdm_fnft(
    samples: *const NfdmComplex,
    n: usize,
    dt: f64,
    t_start: f64,
    out: *mut *mut NfdmSpectrum,
) -> NfdmStatus {
    guard(|| {
        non_null(out, "out")?;
        let q = normalized_signal(samples, n, dt, t_start)?;
        let s = core(fnft_continuous(&q, &LambdaGrid::conjugate(n, dt)))?;
        *out = Box::into_raw(Box::new(NfdmSpectrum(s)));
        Ok(())
    })
}

/// Number of spectral points.
///
/// # Safety
/// `spectrum` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn nfdm_spectrum_len(spectrum: *const NfdmSpectrum) -> usize {
    if spectrum.is_null() {
        0
    } else {
        (*spectrum).0.len()
    }
}

/// Copies the λ values and `ρ(λ)` into caller buffers of `len` entries
/// each (either may be null).
///
/// # Safety
/// `spectrum` must come from this library; non-null buffers must hold
/// `len` entries.
#[no_mangle]
pub unsafe extern "C" fn nfdm_spectrum_read(
    spectrum: *const NfdmSpectrum,
    lambda: *mut f64,
    rho: *mut NfdmComplex,
    len: usize,
) -> NfdmStatus {
    guard(|| {
        non_null(spectrum, "spectrum")?;
        let s = &(*spectrum).0;
        if len < s.len() {
            return Err(fail(
                NfdmStatus::BufferTooSmall,
                format!("{} entries needed", s.len()),
            ));
        }
        if !lambda.is_null() {
            std::slice::from_raw_parts_mut(lambda, s.len()).copy_from_slice(&s.lambdas());
        }
        if !rho.is_null() {
            for (d, r) in std::slice::from_raw_parts_mut(rho, s.len())
                .iter_mut()
                .zip(&s.rho)
            {
                *d = NfdmComplex { re: r.re, im: r.im };
            }
        }
        Ok(())
    })
}

/// Builds a spectrum on the conjugate grid of an `n`-sample frame spaced
/// `dt` from `n` values of `ρ`, ordered as [`nfdm_spectrum_read`] returns
/// them.
///
/// # Safety
/// `rho` must point to `n` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nfdm_spectrum_new(
    rho: *const NfdmComplex,
    n: usize,
    dt: f64,
    out: *mut *mut NfdmSpectrum,
) -> NfdmStatus {
    guard(|| {
        non_null(out, "out")?;
        non_null(rho, "rho")?;
        if n == 0 || !(dt > 0.0 && dt.is_finite()) {
            return Err(fail(NfdmStatus::InvalidArgument, "need n > 0 and dt > 0"));
        }
        let r = std::slice::from_raw_parts(rho, n)
            .iter()
            .map(|z| Complex64::new(z.re, z.im))
            .collect();
        let s = core(NonlinearSpectrum::new(LambdaGrid::conjugate(n, dt), r))?;
        *out = Box::into_raw(Box::new(NfdmSpectrum(s)));
        Ok(())
    })
}

/// Backward NFT onto the frame the spectrum's grid belongs to; writes
/// `n` samples (the spectrum length) to `out`.
///
/// # Safety
/// `spectrum` must come from this library and `out` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn nfdm_bnft(
    spectrum: *const NfdmSpectrum,
    dt: f64,
    t_start: f64,
    out: *mut NfdmComplex,
    n: usize,
) -> NfdmStatus {
    guard(|| {
        non_null(spectrum, "spectrum")?;
        non_null(out, "out")?;
        let s = &(*spectrum).0;
        if n != s.len() {
            return Err(fail(
                NfdmStatus::GridMismatch,
                format!("expected {} samples, got {n}", s.len()),
            ));
        }
        let grid = core(ComplexSignal::zeros(n, dt, t_start, UnitsMode::Normalized))?;
        let q = core(bnft(s, &grid))?;
        for (d, v) in std::slice::from_raw_parts_mut(out, n)
            .iter_mut()
            .zip(q.samples())
        {
            *d = NfdmComplex { re: v.re, im: v.im };
        }
        Ok(())
    })
}

/// # Safety
/// `spectrum` must be null or come from this library, and is invalid
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn nfdm_spectrum_free(spectrum: *mut NfdmSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}

/// Dispersive broadening in symbol times; halved per side with
/// precompensation.
#[no_mangle]
pub extern "C" fn nfdm_channel_memory(
    beta2: f64,
    length: f64,
    symbol_rate: f64,
    rolloff: f64,
    precompensation: bool,
) -> f64 {
    let fiber = FiberParams {
        beta2,
        ..FiberParams::standard_smf()
    }
    .with_length(length);
    channel_memory_symbols(&fiber, symbol_rate, rolloff, precompensation)
}

/// `N_b / (N_b + N_z)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nfdm_rate_efficiency(n_b: usize, n_z: usize, out: *mut f64) -> NfdmStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = core(rate_efficiency(n_b, n_z))?;
        Ok(())
    })
}
