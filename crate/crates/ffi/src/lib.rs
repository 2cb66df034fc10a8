//! C ABI over the brainpref classifier, shrinkage estimator and AUC.
//!
//! Every function returns a [`BpStatus`]; results go through out-pointers.
//! Matrices are dense row-major `double` arrays of `n_rows * n_cols`
//! values. On failure a message is kept per thread and can be read with
//! [`bp_last_error_message`]. Panics never cross the boundary; they come
//! back as `BP_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use brainpref::evaluation::{binary_auc, permutation_test, FastLdaLoo, Task};
use brainpref::lda::{ledoit_wolf, train, ShrinkageLdaModel};
use brainpref::Error;
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpStatus {
    BpOk = 0,
    BpNullPointer = 1,
    BpInvalidInput = 2,
    BpDimension = 3,
    BpNumeric = 4,
    BpFormat = 5,
    BpIo = 6,
    BpTooManySkippedFolds = 7,
    BpBufferTooSmall = 8,
    BpPanic = 9,
}

/// Trained shrinkage LDA model. Opaque; release with [`bp_model_free`].
pub struct BpModel {
    inner: ShrinkageLdaModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: BpStatus, msg: impl Into<String>) -> BpStatus {
    set_error(msg.into());
    status
}

fn status_of(e: &Error) -> BpStatus {
    match e {
        Error::InvalidInput(_) | Error::Invariant(_) => BpStatus::BpInvalidInput,
        Error::Dimension { .. } => BpStatus::BpDimension,
        Error::Numeric(_) => BpStatus::BpNumeric,
        Error::Format(_) | Error::Csv(_) | Error::Json(_) => BpStatus::BpFormat,
        Error::Io(_) => BpStatus::BpIo,
        Error::TooManySkippedFolds { .. } => BpStatus::BpTooManySkippedFolds,
    }
}

/// Runs `body`, clearing the error slot first and mapping errors and panics.
fn guard(body: impl FnOnce() -> Result<(), BpStatus>) -> BpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => BpStatus::BpOk,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(BpStatus::BpPanic, format!("panic: {msg}"))
        }
    }
}

fn lift<T>(r: brainpref::Result<T>) -> Result<T, BpStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], BpStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(BpStatus::BpNullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], BpStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(BpStatus::BpNullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, BpStatus> {
    p.as_mut()
        .ok_or_else(|| fail(BpStatus::BpNullPointer, format!("{what} is null")))
}

unsafe fn model_ref<'a>(m: *const BpModel) -> Result<&'a ShrinkageLdaModel, BpStatus> {
    m.as_ref()
        .map(|m| &m.inner)
        .ok_or_else(|| fail(BpStatus::BpNullPointer, "model is null"))
}

fn checked_len(n: usize, d: usize) -> Result<usize, BpStatus> {
    n.checked_mul(d)
        .ok_or_else(|| fail(BpStatus::BpInvalidInput, "matrix size overflows"))
}

unsafe fn matrix(x: *const f64, n: usize, d: usize) -> Result<DMatrix<f64>, BpStatus> {
    let len = checked_len(n, d)?;
    Ok(DMatrix::from_row_slice(n, d, input(x, len, "x")?))
}

unsafe fn path_arg(path: *const c_char) -> Result<String, BpStatus> {
    if path.is_null() {
        return Err(fail(BpStatus::BpNullPointer, "path is null"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| fail(BpStatus::BpInvalidInput, "path is not UTF-8"))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next brainpref call on the same thread.
#[no_mangle]
pub extern "C" fn bp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Trains a shrinkage LDA model on `n` rows of `d` features.
///
/// # Safety
/// `x` must point to `n * d` doubles, `labels` to `n` ints and `out` to
/// writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn bp_lda_train(
    x: *const f64,
    n: usize,
    d: usize,
    labels: *const i32,
    out: *mut *mut BpModel,
) -> BpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let x = matrix(x, n, d)?;
        let labels = input(labels, n, "labels")?;
        let inner = lift(train(&x, labels))?;
        *out = Box::into_raw(Box::new(BpModel { inner }));
        Ok(())
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bp_model_free(model: *mut BpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of classes, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live model.
#[no_mangle]
pub unsafe extern "C" fn bp_lda_n_classes(model: *const BpModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.classes().len())
}

/// Feature dimension, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live model.
#[no_mangle]
pub unsafe extern "C" fn bp_lda_dim(model: *const BpModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Copies the sorted class labels into `out` (capacity `len`).
///
/// # Safety
/// `model` must be live and `out` must hold `len` ints.
#[no_mangle]
pub unsafe extern "C" fn bp_lda_classes(model: *const BpModel, out: *mut i32, len: usize) -> BpStatus {
    guard(|| {
        let classes = model_ref(model)?.classes();
        if len < classes.len() {
            return Err(fail(BpStatus::BpBufferTooSmall, format!("need {} slots", classes.len())));
        }
        output(out, classes.len(), "out")?.copy_from_slice(classes);
        Ok(())
    })
}

/// Shrinkage intensity chosen at training time.
///
/// # Safety
/// `model` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bp_lda_lambda(model: *const BpModel, out: *mut f64) -> BpStatus {
    guard(|| {
        *out_ref(out, "out")? = model_ref(model)?.shrinkage();
        Ok(())
    })
}

/// Class log-probabilities of one sample, in class-label order.
///
/// # Safety
/// `x` must hold `d` doubles and `out` `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bp_lda_predict_log_prob(
    model: *const BpModel,
    x: *const f64,
    d: usize,
    out: *mut f64,
    out_len: usize,
) -> BpStatus {
    guard(|| {
        let m = model_ref(model)?;
        let lp = lift(m.predict_log_prob(input(x, d, "x")?))?;
        if out_len < lp.len() {
            return Err(fail(BpStatus::BpBufferTooSmall, format!("need {} slots", lp.len())));
        }
        output(out, lp.len(), "out")?.copy_from_slice(&lp);
        Ok(())
    })
}

/// Writes the model in its binary format.
///
/// # Safety
/// `model` must be live and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bp_lda_save(model: *const BpModel, path: *const c_char) -> BpStatus {
    guard(|| {
        let m = model_ref(model)?;
        let path = path_arg(path)?;
        std::fs::write(&path, m.to_bytes()).map_err(|e| fail(BpStatus::BpIo, format!("{path}: {e}")))
    })
}

/// Reads a model written by [`bp_lda_save`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bp_lda_load(path: *const c_char, out: *mut *mut BpModel) -> BpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let path = path_arg(path)?;
        let bytes = std::fs::read(&path).map_err(|e| fail(BpStatus::BpIo, format!("{path}: {e}")))?;
        let inner = lift(ShrinkageLdaModel::from_bytes(&bytes))?;
        *out = Box::into_raw(Box::new(BpModel { inner }));
        Ok(())
    })
}

/// Binary AUC of `scores`; `positive[i]` nonzero marks a positive sample.
/// Ties count one half.
///
/// # Safety
/// `scores` and `positive` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bp_auc(scores: *const f64, positive: *const u8, n: usize, out: *mut f64) -> BpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let pos: Vec<bool> = input(positive, n, "positive")?.iter().map(|&p| p != 0).collect();
        *out = lift(binary_auc(input(scores, n, "scores")?, &pos))?;
        Ok(())
    })
}

/// Ledoit-Wolf shrunk covariance (`d * d`, row-major) and intensity of the
/// rows of `x`.
///
/// # Safety
/// `x` must hold `n * d` doubles, `cov_out` `d * d` doubles and
/// `lambda_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bp_ledoit_wolf(
    x: *const f64,
    n: usize,
    d: usize,
    cov_out: *mut f64,
    lambda_out: *mut f64,
) -> BpStatus {
    guard(|| {
        let lambda_out = out_ref(lambda_out, "lambda_out")?;
        let dd = checked_len(d, d)?;
        let cov_out = output(cov_out, dd, "cov_out")?;
        let lw = lift(ledoit_wolf(&matrix(x, n, d)?))?;
        for i in 0..d {
            for j in 0..d {
                cov_out[i * d + j] = lw.covariance[(i, j)];
            }
        }
        *lambda_out = lw.shrinkage;
        Ok(())
    })
}

/// Leave-one-out shrinkage LDA AUC of `labels` on `x`, with the add-one
/// permutation p-value over `n_perm` shuffles drawn from `seed`.
///
/// # Safety
/// `x` must hold `n * d` doubles, `labels` `n` ints; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn bp_permutation_test(
    x: *const f64,
    n: usize,
    d: usize,
    labels: *const i32,
    n_perm: usize,
    seed: u64,
    auc_out: *mut f64,
    p_out: *mut f64,
) -> BpStatus {
    guard(|| {
        let auc_out = out_ref(auc_out, "auc_out")?;
        let p_out = out_ref(p_out, "p_out")?;
        let x = matrix(x, n, d)?;
        let labels = input(labels, n, "labels")?;
        let engine = lift(FastLdaLoo::new(&x))?;
        let report = lift(permutation_test(&engine, "", Task::Explicit, labels, n_perm, seed))?;
        *auc_out = report.auc;
        *p_out = report.p_value;
        Ok(())
    })
}
