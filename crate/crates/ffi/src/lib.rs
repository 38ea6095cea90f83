//! C interface to checkpoint loading, conditioning extraction and synthesis.
//!
//! Handles are opaque and owned by the caller until passed to the matching
//! `*_free`. Every call returns a [`DlStatus`]; on failure the message is
//! available from [`dl_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use drumloop::audio::{AudioBuffer, CANONICAL_RATE};
use drumloop::features::{ConditioningSet, NormStats};
use drumloop::model::{load_checkpoint, WaveUNet};
use drumloop::Error;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Shape = 5,
    NonFinite = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// A loaded model.
pub struct DlModel {
    inner: WaveUNet<f32>,
}

/// Min-max statistics of the timbral features.
pub struct DlNormStats {
    inner: NormStats,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> DlStatus {
    match e {
        Error::InvalidArgument(_) | Error::EmptySignal => DlStatus::InvalidArgument,
        Error::ShapeMismatch { .. } => DlStatus::Shape,
        Error::NonFinite { .. } => DlStatus::NonFinite,
        Error::Io { .. } => DlStatus::Io,
        Error::Format { .. } | Error::Wav(_) | Error::Json(_) => DlStatus::Format,
    }
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (DlStatus, String)>) -> DlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DlStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DlStatus::Panic
        }
    }
}

fn lift<T>(r: drumloop::Result<T>) -> Result<T, (DlStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (DlStatus, String) {
    (DlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, (DlStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| (DlStatus::InvalidArgument, "path is not UTF-8".into()))
}

/// Message of the last failed call on this thread; empty if none. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_model_load(path: *const c_char, out: *mut *mut DlModel) -> DlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = path_arg(path)?;
        let model = lift(load_checkpoint(&path).and_then(|c| c.into_model()))?;
        *out = Box::into_raw(Box::new(DlModel { inner: model }));
        Ok(())
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must come from [`dl_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dl_model_free(model: *mut DlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Conditioning channels the model expects and samples it produces.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dl_model_shape(
    model: *const DlModel,
    channels: *mut usize,
    length: *mut usize,
) -> DlStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if channels.is_null() || length.is_null() {
            return Err(null("output"));
        }
        *channels = m.inner.config().conditioning_channels;
        *length = m.inner.config().nominal_len;
        Ok(())
    })
}

/// Renders audio from `channels × length` row-major conditioning into
/// `out`, which must hold at least `length` samples. Magnitude models use
/// `iterations` Griffin-Lim steps seeded with `seed`.
///
/// # Safety
/// `conditioning` must point to `channels · length` floats and `out` to
/// `out_len` floats.
#[no_mangle]
pub unsafe extern "C" fn dl_model_synthesize(
    model: *const DlModel,
    conditioning: *const f32,
    channels: usize,
    length: usize,
    iterations: usize,
    seed: u64,
    out: *mut f32,
    out_len: usize,
) -> DlStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if conditioning.is_null() || out.is_null() {
            return Err(null("buffer"));
        }
        let n = channels
            .checked_mul(length)
            .ok_or((DlStatus::InvalidArgument, "size overflow".to_string()))?;
        let data = std::slice::from_raw_parts(conditioning, n).to_vec();
        let input = lift(drumloop::autodiff::Tensor::new(vec![channels, length], data))?;
        let audio = lift(m.inner.synthesize(&input, iterations, seed))?;
        if out_len < audio.len() {
            return Err((
                DlStatus::BufferTooSmall,
                format!("output needs {} samples, buffer holds {out_len}", audio.len()),
            ));
        }
        for (o, v) in std::slice::from_raw_parts_mut(out, audio.len()).iter_mut().zip(audio.samples()) {
            *o = *v as f32;
        }
        Ok(())
    })
}

/// Loads normalization statistics written by the prepare step.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_norm_stats_load(path: *const c_char, out: *mut *mut DlNormStats) -> DlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let stats = lift(NormStats::load(path_arg(path)?))?;
        *out = Box::into_raw(Box::new(DlNormStats { inner: stats }));
        Ok(())
    })
}

/// Releases statistics; null is ignored.
///
/// # Safety
/// `stats` must come from [`dl_norm_stats_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dl_norm_stats_free(stats: *mut DlNormStats) {
    if !stats.is_null() {
        drop(Box::from_raw(stats));
    }
}

/// Extracts model conditioning from 16 kHz mono samples. Writes
/// `channels × len` row-major values (37 with the envelope, 36 without)
/// into `out` and the channel count into `channels`.
///
/// # Safety
/// `samples` must point to `len` doubles and `out` to `out_len` floats.
#[no_mangle]
pub unsafe extern "C" fn dl_extract_conditioning(
    stats: *const DlNormStats,
    samples: *const f64,
    len: usize,
    include_envelope: bool,
    out: *mut f32,
    out_len: usize,
    channels: *mut usize,
) -> DlStatus {
    guard(|| {
        let s = stats.as_ref().ok_or_else(|| null("stats"))?;
        if samples.is_null() || out.is_null() || channels.is_null() {
            return Err(null("buffer"));
        }
        let x = std::slice::from_raw_parts(samples, len).to_vec();
        let audio = lift(AudioBuffer::new(x, CANONICAL_RATE))?;
        let cond = lift(ConditioningSet::extract(&audio, &s.inner))?;
        let t = lift(cond.assemble(include_envelope))?;
        if out_len < t.len() {
            return Err((
                DlStatus::BufferTooSmall,
                format!("conditioning needs {} values, buffer holds {out_len}", t.len()),
            ));
        }
        std::slice::from_raw_parts_mut(out, t.len()).copy_from_slice(t.data());
        *channels = t.shape()[0];
        Ok(())
    })
}
