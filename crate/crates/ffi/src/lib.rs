//! C ABI over `gloss-core`.
//!
//! Models are exposed as an opaque `GlossModel` handle. Every fallible call
//! returns a `GlossStatus`; on failure, `gloss_last_error` returns a message
//! for the calling thread that stays valid until that thread's next call.
//! Vectors are `double` arrays of length `gloss_model_dim`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use gloss::{eval, genlab, persistence, GlossError, InferOptions, Model, ModelKind};

/// Opaque model handle.
pub struct GlossModel {
    inner: Model,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlossStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    BadFormat = 4,
    InvalidArgument = 5,
    NotPositional = 6,
    BufferTooSmall = 7,
    Internal = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &GlossError) -> GlossStatus {
    match err {
        GlossError::Io { .. } => GlossStatus::Io,
        GlossError::BadHeader | GlossError::UnexpectedEof | GlossError::InvalidModel(_) => {
            GlossStatus::BadFormat
        }
        GlossError::NotPositional => GlossStatus::NotPositional,
        _ => GlossStatus::InvalidArgument,
    }
}

struct Failure(GlossStatus, String);

impl From<GlossError> for Failure {
    fn from(e: GlossError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(GlossStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, recording any failure or panic as the thread's last error.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> GlossStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => GlossStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            GlossStatus::Internal
        }
    }
}

unsafe fn model_ref<'a>(model: *const GlossModel) -> Result<&'a Model, Failure> {
    model
        .as_ref()
        .map(|m| &m.inner)
        .ok_or_else(|| null("model"))
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        Failure(
            GlossStatus::InvalidUtf8,
            format!("{what} is not valid UTF-8"),
        )
    })
}

unsafe fn vec_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out(out: *mut f64, out_len: usize, values: &[f64]) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if out_len < values.len() {
        return Err(Failure(
            GlossStatus::BufferTooSmall,
            format!(
                "output buffer holds {out_len} values, need {}",
                values.len()
            ),
        ));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

/// Message for the last failed call on this thread, or NULL.
#[no_mangle]
pub extern "C" fn gloss_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a model file. On success `*out` owns a handle to release with
/// `gloss_model_free`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gloss_model_load(
    path: *const c_char,
    out: *mut *mut GlossModel,
) -> GlossStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let inner = persistence::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(GlossModel { inner }));
        Ok(())
    })
}

/// Writes a model file, including stored latents.
///
/// # Safety
/// `model` must come from `gloss_model_load`; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gloss_model_save(
    model: *const GlossModel,
    path: *const c_char,
) -> GlossStatus {
    guard(|| {
        let model = model_ref(model)?;
        let path = str_arg(path, "path")?;
        persistence::save(model, Path::new(path))?;
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gloss_model_free(model: *mut GlossModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Latent dimensionality, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gloss_model_dim(model: *const GlossModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Vocabulary size including the unknown token, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gloss_model_vocab_size(model: *const GlossModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.vocab.len())
}

/// Number of stored training latents (0 if none were saved).
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gloss_model_num_latents(model: *const GlossModel) -> usize {
    model
        .as_ref()
        .and_then(|m| m.inner.latents.as_ref())
        .map_or(0, |l| l.len())
}

/// 0 for bag-of-words, 1 for positional, -1 for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gloss_model_kind(model: *const GlossModel) -> i32 {
    match model.as_ref().map(|m| m.inner.kind()) {
        Some(ModelKind::Bow) => 0,
        Some(ModelKind::Pos) => 1,
        None => -1,
    }
}

/// Ball radius of the latent space, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gloss_model_radius(model: *const GlossModel) -> f64 {
    model.as_ref().map_or(0.0, |m| m.inner.config.radius)
}

/// Copies stored training latent `index` into `out`.
///
/// # Safety
/// `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gloss_model_latent(
    model: *const GlossModel,
    index: usize,
    out: *mut f64,
    out_len: usize,
) -> GlossStatus {
    guard(|| {
        let latents = model_ref(model)?.latents()?;
        if index >= latents.len() {
            return Err(Failure(
                GlossStatus::InvalidArgument,
                format!("latent index {index} outside 0..{}", latents.len()),
            ));
        }
        write_out(out, out_len, latents.row(index))
    })
}

/// Embeds a sentence by optimizing a fresh latent against the frozen decoder.
/// `steps` = 250 and `lr` = 1.0 are the usual settings; a nonzero
/// `plain_sgd` replaces Adam with plain gradient descent.
///
/// # Safety
/// `sentence` must be NUL-terminated; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gloss_embed(
    model: *const GlossModel,
    sentence: *const c_char,
    steps: usize,
    lr: f64,
    plain_sgd: i32,
    out: *mut f64,
    out_len: usize,
) -> GlossStatus {
    guard(|| {
        let model = model_ref(model)?;
        let sentence = str_arg(sentence, "sentence")?;
        let opts = InferOptions {
            steps,
            lr,
            plain_sgd: plain_sgd != 0,
        };
        let z = gloss::infer_latent(model, sentence, &opts)?;
        write_out(out, out_len, &z)
    })
}

/// Cosine similarity of two `len`-vectors.
///
/// # Safety
/// `a` and `b` must hold `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gloss_cosine(
    a: *const f64,
    b: *const f64,
    len: usize,
    out: *mut f64,
) -> GlossStatus {
    guard(|| {
        let a = vec_arg(a, len, "a")?;
        let b = vec_arg(b, len, "b")?;
        let c = eval::cosine(a, b)?;
        write_out(out, 1, &[c])
    })
}

/// `(1-t)·src + t·tgt` projected onto the model's latent ball.
///
/// # Safety
/// `src`, `tgt` and `out` must each hold `gloss_model_dim(model)` doubles.
#[no_mangle]
pub unsafe extern "C" fn gloss_interpolate(
    model: *const GlossModel,
    src: *const f64,
    tgt: *const f64,
    t: f64,
    out: *mut f64,
) -> GlossStatus {
    guard(|| {
        let model = model_ref(model)?;
        let d = model.dim();
        let z = genlab::interpolate(
            vec_arg(src, d, "src")?,
            vec_arg(tgt, d, "tgt")?,
            t,
            model.config.radius,
        )?;
        write_out(out, d, &z)
    })
}

/// Greedy decode of `length` tokens from latent `z` (positional models).
/// On success `*out` is a string to release with `gloss_string_free`.
///
/// # Safety
/// `z` must hold `gloss_model_dim(model)` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gloss_greedy_decode(
    model: *const GlossModel,
    z: *const f64,
    length: usize,
    out: *mut *mut c_char,
) -> GlossStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = model_ref(model)?;
        let text = genlab::greedy_text(model, vec_arg(z, model.dim(), "z")?, length)?;
        let c = CString::new(text)
            .map_err(|_| Failure(GlossStatus::Internal, "decoded text contains NUL".into()))?;
        *out = c.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn gloss_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
