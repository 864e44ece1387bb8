//! C ABI over `kanprobe`.
//!
//! Datasets and heads are opaque handles owned by the caller and released
//! with `kp_dataset_free` / `kp_head_free`. Every fallible function returns a
//! [`KpStatus`]; on failure `kp_last_error_message` describes the error for the
//! calling thread. Panics are caught at the boundary and reported as
//! `KP_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use kanprobe::checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
use kanprobe::data::{
    gen_synthetic, load_dataset, save_dataset, standardize, FeatureDataset, Split, SyntheticKind,
};
use kanprobe::heads::{head_forward, predict, HeadKind, ProbeHead};
use kanprobe::optim::{evaluate, train, TrainConfig};
use kanprobe::{Error, Matrix};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Format = 3,
    Io = 4,
    Runtime = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KpHeadKind {
    Linear = 0,
    Kan = 1,
}

impl From<KpHeadKind> for HeadKind {
    fn from(k: KpHeadKind) -> Self {
        match k {
            KpHeadKind::Linear => HeadKind::Linear,
            KpHeadKind::Kan => HeadKind::Kan,
        }
    }
}

/// Training settings; obtain defaults from `kp_train_config_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct KpTrainConfig {
    pub head: KpHeadKind,
    pub grid_size: usize,
    pub degree: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl From<&KpTrainConfig> for TrainConfig {
    fn from(c: &KpTrainConfig) -> Self {
        TrainConfig {
            head: c.head.into(),
            grid_size: c.grid_size,
            degree: c.degree,
            grid_range: (c.grid_lo, c.grid_hi),
            learning_rate: c.learning_rate,
            batch_size: c.batch_size,
            max_epochs: c.max_epochs,
            early_stop_patience: c.patience,
            seed: c.seed,
            ..TrainConfig::default()
        }
    }
}

/// Opaque feature dataset.
pub struct KpDataset {
    inner: FeatureDataset,
}

/// Opaque trained or loaded probing head with its run metadata.
pub struct KpHead {
    head: ProbeHead,
    meta: CheckpointMeta,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> KpStatus {
    match err {
        Error::Io(_) => KpStatus::Io,
        e if e.is_format_error() => KpStatus::Format,
        Error::InvalidArgument(_)
        | Error::DimensionMismatch { .. }
        | Error::MemoryBudget { .. } => KpStatus::InvalidArgument,
        _ => KpStatus::Runtime,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> KpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KpStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            KpStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("panic inside kanprobe".into());
            KpStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Lib(Error::InvalidArgument(format!("{what} is not UTF-8"))))
}

unsafe fn path_arg(p: *const c_char, what: &'static str) -> Result<PathBuf, Fail> {
    str_arg(p, what).map(PathBuf::from)
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

fn split_arg(split: i32) -> Result<Option<Split>, Fail> {
    match split {
        -1 => Ok(None),
        0..=2 => Ok(Split::from_tag(split as u8)),
        _ => Err(Fail::Lib(Error::InvalidArgument(format!(
            "unknown split {split}"
        )))),
    }
}

/// Message for the last failed call on this thread, or NULL. Valid until
/// the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn kp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Defaults: KAN head, G=5, k=3, range [-2, 2], lr 0.001, batch 64,
/// 50 epochs, patience 10, seed 0.
#[no_mangle]
pub extern "C" fn kp_train_config_default() -> KpTrainConfig {
    let c = TrainConfig::default();
    KpTrainConfig {
        head: KpHeadKind::Kan,
        grid_size: c.grid_size,
        degree: c.degree,
        grid_lo: c.grid_range.0,
        grid_hi: c.grid_range.1,
        learning_rate: c.learning_rate,
        batch_size: c.batch_size,
        max_epochs: c.max_epochs,
        patience: c.early_stop_patience,
        seed: c.seed,
    }
}

/// Synthetic dataset; `kind` is "linear", "rings" or "additive_poly".
///
/// # Safety
/// `kind` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kp_dataset_generate(
    kind: *const c_char,
    n: usize,
    d: usize,
    n_classes: usize,
    noise: f64,
    seed: u64,
    out: *mut *mut KpDataset,
) -> KpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let kind: SyntheticKind = str_arg(kind, "kind")?.parse()?;
        let inner = gen_synthetic(kind, n, d, n_classes, noise, seed)?;
        *out = Box::into_raw(Box::new(KpDataset { inner }));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kp_dataset_load(
    path: *const c_char,
    out: *mut *mut KpDataset,
) -> KpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let inner = load_dataset(path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(KpDataset { inner }));
        Ok(())
    })
}

/// # Safety
/// `ds` must be a live dataset handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn kp_dataset_save(ds: *const KpDataset, path: *const c_char) -> KpStatus {
    guard(|| {
        let ds = ref_arg(ds, "dataset")?;
        save_dataset(&ds.inner, path_arg(path, "path")?)?;
        Ok(())
    })
}

/// New dataset with every split scaled by train-split mean and std.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kp_dataset_standardize(
    ds: *const KpDataset,
    out: *mut *mut KpDataset,
) -> KpStatus {
    guard(|| {
        let ds = ref_arg(ds, "dataset")?;
        let out = out_arg(out, "out")?;
        let (inner, _) = standardize(&ds.inner)?;
        *out = Box::into_raw(Box::new(KpDataset { inner }));
        Ok(())
    })
}

/// Writes rows, feature dimension and class count; any pointer may be NULL.
///
/// # Safety
/// `ds` must be a live dataset handle; non-NULL outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn kp_dataset_shape(
    ds: *const KpDataset,
    n: *mut usize,
    d: *mut usize,
    n_classes: *mut usize,
) -> KpStatus {
    guard(|| {
        let ds = &ref_arg(ds, "dataset")?.inner;
        for (p, v) in [(n, ds.len()), (d, ds.dim()), (n_classes, ds.n_classes())] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `ds` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kp_dataset_free(ds: *mut KpDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Trains a head on the dataset as given and returns its best checkpoint.
///
/// # Safety
/// `ds` must be a live dataset handle; `config` and `out` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn kp_train(
    ds: *const KpDataset,
    config: *const KpTrainConfig,
    out: *mut *mut KpHead,
) -> KpStatus {
    guard(|| {
        let ds = ref_arg(ds, "dataset")?;
        let config = TrainConfig::from(ref_arg(config, "config")?);
        let out = out_arg(out, "out")?;
        let outcome = train(&ds.inner, &config)?;
        let mut meta = CheckpointMeta::for_run(&outcome.head, &config, &outcome.metrics);
        meta.extra.insert(
            "provenance".into(),
            ds.inner.provenance().replace(['\n', '\r'], " "),
        );
        *out = Box::into_raw(Box::new(KpHead {
            head: outcome.head,
            meta,
        }));
        Ok(())
    })
}

/// Predicted class per row of a row-major `n_rows x n_cols` matrix.
///
/// # Safety
/// `features` must hold `n_rows * n_cols` doubles and `out_labels`
/// `n_rows` entries.
#[no_mangle]
pub unsafe extern "C" fn kp_head_predict(
    head: *const KpHead,
    features: *const f64,
    n_rows: usize,
    n_cols: usize,
    out_labels: *mut usize,
) -> KpStatus {
    guard(|| {
        let head = ref_arg(head, "head")?;
        if n_rows == 0 {
            return Ok(());
        }
        let len = n_rows
            .checked_mul(n_cols)
            .ok_or_else(|| Error::InvalidArgument("matrix size overflows".into()))?;
        if features.is_null() {
            return Err(Fail::Null("features"));
        }
        if out_labels.is_null() {
            return Err(Fail::Null("out_labels"));
        }
        let x = Matrix::from_vec(
            n_rows,
            n_cols,
            std::slice::from_raw_parts(features, len).to_vec(),
        )?;
        let logits = head_forward(&head.head, &x, None)?;
        let labels = predict(&logits);
        std::slice::from_raw_parts_mut(out_labels, n_rows).copy_from_slice(&labels);
        Ok(())
    })
}

/// Mean cross-entropy and accuracy on a split (0 train, 1 val, 2 test,
/// -1 all rows).
///
/// # Safety
/// Handles must be live; `loss` and `accuracy` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn kp_head_evaluate(
    head: *const KpHead,
    ds: *const KpDataset,
    split: i32,
    loss: *mut f64,
    accuracy: *mut f64,
) -> KpStatus {
    guard(|| {
        let head = ref_arg(head, "head")?;
        let ds = &ref_arg(ds, "dataset")?.inner;
        let (loss, accuracy) = (out_arg(loss, "loss")?, out_arg(accuracy, "accuracy")?);
        let (x, y) = match split_arg(split)? {
            Some(s) => ds.split_view(s),
            None => {
                let all: Vec<usize> = (0..ds.len()).collect();
                (ds.matrix(&all), ds.labels().to_vec())
            }
        };
        if y.is_empty() {
            return Err(Fail::Lib(Error::EmptySplit("requested")));
        }
        (*loss, *accuracy) = evaluate(&head.head, &x, &y)?;
        Ok(())
    })
}

/// Trainable parameter count, or 0 for NULL.
///
/// # Safety
/// `head` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kp_head_param_count(head: *const KpHead) -> usize {
    head.as_ref().map_or(0, |h| h.head.param_count())
}

/// Best-epoch validation loss and 1-based epoch recorded for the head.
///
/// # Safety
/// `head` must be a live handle; outputs valid pointers or NULL.
#[no_mangle]
pub unsafe extern "C" fn kp_head_best(
    head: *const KpHead,
    best_val_loss: *mut f64,
    best_epoch: *mut usize,
) -> KpStatus {
    guard(|| {
        let h = ref_arg(head, "head")?;
        if let Some(p) = best_val_loss.as_mut() {
            *p = h.meta.best_val_loss;
        }
        if let Some(p) = best_epoch.as_mut() {
            *p = h.meta.best_epoch;
        }
        Ok(())
    })
}

/// # Safety
/// `head` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn kp_head_save(head: *const KpHead, path: *const c_char) -> KpStatus {
    guard(|| {
        let h = ref_arg(head, "head")?;
        save_checkpoint(&h.head, &h.meta, path_arg(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kp_head_load(path: *const c_char, out: *mut *mut KpHead) -> KpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let (head, meta) = load_checkpoint(path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(KpHead { head, meta }));
        Ok(())
    })
}

/// # Safety
/// `head` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kp_head_free(head: *mut KpHead) {
    if !head.is_null() {
        drop(Box::from_raw(head));
    }
}
