//! C ABI over the `entropic-bergstrom` toolkit.
//!
//! Conventions:
//!
//! * every fallible function returns an [`EbStatus`]; results go through out-pointers
//! * on failure a message is stored per thread and read with [`eb_last_error_message`]
//! * handles (`EbSpdMatrix`, `EbMixture`) are opaque and released with their `_free` function
//! * strings returned by the library are released with [`eb_string_free`]
//! * matrices are passed as row-major `n * n` arrays, indices are 0-based
//!
//! Panics never cross the boundary; they are reported as `EB_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use entropic_bergstrom::estimators::{self, Method, ScalarEstimate};
use entropic_bergstrom::matrix;
use entropic_bergstrom::rng::stream_rng;
use entropic_bergstrom::runner::{self, CheckSpec, Format, SuiteConfig};
use entropic_bergstrom::{Error, GaussianMixture, SpdMatrix};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotPositiveDefinite = 3,
    DimensionMismatch = 4,
    IndexOutOfRange = 5,
    Precondition = 6,
    Parse = 7,
    Io = 8,
    Panic = 9,
}

/// How an estimate was obtained.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EbMethod {
    ClosedForm = 0,
    PlugInMc = 1,
    Knn = 2,
}

/// A scalar estimate with its standard error (0 for closed forms).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EbScalarEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub method: EbMethod,
}

impl From<ScalarEstimate> for EbScalarEstimate {
    fn from(e: ScalarEstimate) -> Self {
        EbScalarEstimate {
            value: e.value,
            std_error: e.std_error,
            n_samples: e.n_samples as u64,
            method: match e.method {
                Method::ClosedForm => EbMethod::ClosedForm,
                Method::PlugInMc => EbMethod::PlugInMc,
                Method::Knn => EbMethod::Knn,
            },
        }
    }
}

/// Opaque symmetric positive-definite matrix.
pub struct EbSpdMatrix {
    inner: SpdMatrix,
}

/// Opaque Gaussian mixture.
pub struct EbMixture {
    inner: GaussianMixture,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: EbStatus,
    message: String,
}

impl Failure {
    fn new(status: EbStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::NotSymmetric { .. } | Error::NotPositiveDefinite | Error::SingularMap => {
                EbStatus::NotPositiveDefinite
            }
            Error::DimensionMismatch { .. } => EbStatus::DimensionMismatch,
            Error::IndexOutOfRange { .. } => EbStatus::IndexOutOfRange,
            Error::Precondition(_) | Error::DegenerateLaw(_) => EbStatus::Precondition,
            Error::Json(_) | Error::Csv(_) | Error::Config(_) => EbStatus::Parse,
            Error::Io(_) => EbStatus::Io,
            _ => EbStatus::InvalidArgument,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::new(EbStatus::Parse, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            EbStatus::Ok
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
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            EbStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(EbStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure::new(EbStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::new(EbStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(EbStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(EbStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::new(EbStatus::Parse, "output contains an interior NUL byte"))
}

/// Message of the last failed call on this thread, or NULL after a success.
///
/// The pointer stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn eb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn eb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn eb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds an SPD matrix from `n * n` row-major entries.
///
/// # Safety
/// `data` must point to `n * n` doubles and `out_matrix` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn eb_spd_new(n: usize, data: *const f64, out_matrix: *mut *mut EbSpdMatrix) -> EbStatus {
    guard(|| {
        let slot = out(out_matrix, "out_matrix")?;
        let len = n
            .checked_mul(n)
            .ok_or_else(|| Failure::new(EbStatus::InvalidArgument, "dimension overflows"))?;
        let entries = slice(data, len, "data")?;
        let inner = SpdMatrix::from_row_slice(n, entries)?;
        *slot = Box::into_raw(Box::new(EbSpdMatrix { inner }));
        Ok(())
    })
}

/// # Safety
/// `m` must come from [`eb_spd_new`] and not have been freed already. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn eb_spd_free(m: *mut EbSpdMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Dimension of the matrix, 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eb_spd_dim(m: *const EbSpdMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.dim())
}

/// Natural log of the determinant.
///
/// # Safety
/// `m` must be a live handle and `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn eb_spd_log_det(m: *const EbSpdMatrix, out_value: *mut f64) -> EbStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        *out(out_value, "out_value")? = matrix::log_det(&m.inner);
        Ok(())
    })
}

/// Schur complement of the leading block: `det(M) / det(M minus last row and column)`.
///
/// # Safety
/// `m` must be a live handle and `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn eb_spd_schur_complement_last(m: *const EbSpdMatrix, out_value: *mut f64) -> EbStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        *out(out_value, "out_value")? = matrix::schur_complement_last(&m.inner)?;
        Ok(())
    })
}

/// Bergström gap for the minor obtained by deleting row and column `i`.
///
/// # Safety
/// `a`, `b` must be live handles and `out_gap` writable.
#[no_mangle]
pub unsafe extern "C" fn eb_bergstrom_gap(
    a: *const EbSpdMatrix,
    b: *const EbSpdMatrix,
    i: usize,
    out_gap: *mut f64,
) -> EbStatus {
    guard(|| {
        let (a, b) = (deref(a, "a")?, deref(b, "b")?);
        *out(out_gap, "out_gap")? = matrix::bergstrom_gap(&a.inner, &b.inner, i)?;
        Ok(())
    })
}

/// Ky Fan gap for the leading `n - k` block, `1 <= k < n`.
///
/// # Safety
/// `a`, `b` must be live handles and `out_gap` writable.
#[no_mangle]
pub unsafe extern "C" fn eb_kyfan_gap(
    a: *const EbSpdMatrix,
    b: *const EbSpdMatrix,
    k: usize,
    out_gap: *mut f64,
) -> EbStatus {
    guard(|| {
        let (a, b) = (deref(a, "a")?, deref(b, "b")?);
        *out(out_gap, "out_gap")? = matrix::kyfan_gap(&a.inner, &b.inner, k)?;
        Ok(())
    })
}

/// Gap of the λ-weighted linear Bonnesen form.
///
/// # Safety
/// `a`, `b` must be live handles and `out_gap` writable.
#[no_mangle]
pub unsafe extern "C" fn eb_bonnesen_linear_gap(
    a: *const EbSpdMatrix,
    b: *const EbSpdMatrix,
    lambda: f64,
    i: usize,
    out_gap: *mut f64,
) -> EbStatus {
    guard(|| {
        let (a, b) = (deref(a, "a")?, deref(b, "b")?);
        *out(out_gap, "out_gap")? = matrix::bonnesen_linear_gap(&a.inner, &b.inner, lambda, i)?;
        Ok(())
    })
}

/// Parses a mixture from JSON: `{"weights": [...], "components": [{"mean": [...], "cov": [[...]]}]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out_mixture` writable.
#[no_mangle]
pub unsafe extern "C" fn eb_mixture_from_json(json: *const c_char, out_mixture: *mut *mut EbMixture) -> EbStatus {
    guard(|| {
        let slot = out(out_mixture, "out_mixture")?;
        let inner: GaussianMixture = serde_json::from_str(string(json, "json")?)?;
        *slot = Box::into_raw(Box::new(EbMixture { inner }));
        Ok(())
    })
}

/// Serialises a mixture to JSON. Free the result with [`eb_string_free`].
///
/// # Safety
/// `m` must be a live handle and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn eb_mixture_to_json(m: *const EbMixture, out_json: *mut *mut c_char) -> EbStatus {
    guard(|| {
        let m = deref(m, "mixture")?;
        let slot = out(out_json, "out_json")?;
        *slot = into_c_string(serde_json::to_string(&m.inner)?)?;
        Ok(())
    })
}

/// # Safety
/// `m` must come from [`eb_mixture_from_json`] and not have been freed already. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn eb_mixture_free(m: *mut EbMixture) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Dimension of the mixture, 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eb_mixture_dim(m: *const EbMixture) -> usize {
    m.as_ref().map_or(0, |m| m.inner.dim())
}

/// Log-density at `x` (length `len`, must equal the dimension).
///
/// # Safety
/// `x` must point to `len` doubles and `out_value` be writable.
#[no_mangle]
pub unsafe extern "C" fn eb_mixture_log_density(
    m: *const EbMixture,
    x: *const f64,
    len: usize,
    out_value: *mut f64,
) -> EbStatus {
    guard(|| {
        let m = deref(m, "mixture")?;
        *out(out_value, "out_value")? = m.inner.log_density(slice(x, len, "x")?)?;
        Ok(())
    })
}

/// Score (gradient of the log-density) at `x`, written to `out_score` of length `len`.
///
/// # Safety
/// `x` and `out_score` must each point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn eb_mixture_score(
    m: *const EbMixture,
    x: *const f64,
    len: usize,
    out_score: *mut f64,
) -> EbStatus {
    guard(|| {
        let m = deref(m, "mixture")?;
        let score = m.inner.score(slice(x, len, "x")?)?;
        if out_score.is_null() {
            return Err(Failure::new(EbStatus::NullPointer, "out_score is null"));
        }
        std::slice::from_raw_parts_mut(out_score, len).copy_from_slice(&score);
        Ok(())
    })
}

/// Draws `count` samples, written row-major to `out_samples` (capacity `capacity`
/// doubles, at least `count * dim`). The same seed always gives the same draws.
///
/// # Safety
/// `out_samples` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn eb_mixture_sample(
    m: *const EbMixture,
    seed: u64,
    count: usize,
    out_samples: *mut f64,
    capacity: usize,
) -> EbStatus {
    guard(|| {
        let m = deref(m, "mixture")?;
        let needed = count
            .checked_mul(m.inner.dim())
            .ok_or_else(|| Failure::new(EbStatus::InvalidArgument, "sample count overflows"))?;
        if capacity < needed {
            return Err(Failure::new(
                EbStatus::InvalidArgument,
                format!("buffer holds {capacity} doubles, {needed} needed"),
            ));
        }
        if needed == 0 {
            return Ok(());
        }
        if out_samples.is_null() {
            return Err(Failure::new(EbStatus::NullPointer, "out_samples is null"));
        }
        let samples = m.inner.sample(&mut stream_rng(seed, &["ffi", "sample"]), count);
        std::slice::from_raw_parts_mut(out_samples, needed).copy_from_slice(samples.as_flat());
        Ok(())
    })
}

/// Plug-in Monte-Carlo estimate of the differential entropy (nats).
///
/// # Safety
/// `m` must be a live handle and `out_estimate` writable.
#[no_mangle]
pub unsafe extern "C" fn eb_mc_entropy(
    m: *const EbMixture,
    samples: usize,
    seed: u64,
    out_estimate: *mut EbScalarEstimate,
) -> EbStatus {
    guard(|| {
        let m = deref(m, "mixture")?;
        let slot = out(out_estimate, "out_estimate")?;
        *slot = estimators::mc_entropy(&m.inner, samples, &mut stream_rng(seed, &["ffi", "entropy"]))?.into();
        Ok(())
    })
}

/// Plug-in Monte-Carlo estimate of the Fisher information (trace form).
///
/// # Safety
/// `m` must be a live handle and `out_estimate` writable.
#[no_mangle]
pub unsafe extern "C" fn eb_mc_fisher(
    m: *const EbMixture,
    samples: usize,
    seed: u64,
    out_estimate: *mut EbScalarEstimate,
) -> EbStatus {
    guard(|| {
        let m = deref(m, "mixture")?;
        let slot = out(out_estimate, "out_estimate")?;
        *slot = estimators::mc_fisher(&m.inner, samples, &mut stream_rng(seed, &["ffi", "fisher"]))?.into();
        Ok(())
    })
}

/// Runs one registered check on generated instances and returns the JSON report.
/// `dim = 0` uses the check's default dimensions.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn eb_run_check_json(
    name: *const c_char,
    dim: usize,
    instances: usize,
    samples: usize,
    seed: u64,
    out_json: *mut *mut c_char,
) -> EbStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        let mut spec = CheckSpec::named(string(name, "name")?);
        if dim > 0 {
            spec.dims = Some(vec![dim]);
        }
        let cfg = SuiteConfig {
            checks: vec![spec],
            instances_per_check: instances,
            mc_samples: samples,
            seed,
            ..SuiteConfig::default()
        };
        *slot = into_c_string(runner::run_suite(&cfg)?.render(Format::Json)?)?;
        Ok(())
    })
}

/// Runs a suite from a JSON configuration (NULL for the default suite) and
/// returns the JSON report.
///
/// # Safety
/// `config_json` must be NULL or a NUL-terminated string, `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn eb_run_suite_json(config_json: *const c_char, out_json: *mut *mut c_char) -> EbStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        let cfg = if config_json.is_null() {
            SuiteConfig::default()
        } else {
            SuiteConfig::from_json(string(config_json, "config_json")?)?
        };
        *slot = into_c_string(runner::run_suite(&cfg)?.render(Format::Json)?)?;
        Ok(())
    })
}
