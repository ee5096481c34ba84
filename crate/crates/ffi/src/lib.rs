//! C ABI over the gated fusion classifier, the forest baseline and the
//! evaluation suite.
//!
//! Conventions, uniform across the surface:
//!
//! * Every fallible function returns an [`SflStatus`]; `SFL_STATUS_OK` is 0.
//! * Models and forests are opaque handles created by the `_train`
//!   functions and released with the matching `_free`. Freeing a null
//!   handle is a no-op; freeing the same handle twice is undefined.
//! * Matrices are row-major `f64` buffers. A model trained on `d`-column
//!   embeddings standardizes inputs with the scalers fitted at training
//!   time, so callers pass raw feature values.
//! * After any status other than `SFL_STATUS_OK`, [`sfl_last_error_message`]
//!   returns a NUL-terminated description. The pointer stays valid until
//!   the next failing call on the same thread.
//! * Panics never unwind across the boundary; they surface as
//!   `SFL_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ndarray::ArrayView2;

use sfl_core::features::{fit_scaler, transform, ScalerParams, STRUCT_DIM};
use sfl_core::forest::{
    fit_forest, mdi_importances, predict_proba_forest, Forest, ForestConfig, ForestError,
    MaxFeatures,
};
use sfl_core::metrics::evaluate;
use sfl_core::sfl::{predict_proba, train, SflError, SflParams, TrainConfig};

/// Result of every fallible call in this API.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SflStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument value or buffer shape was rejected.
    InvalidArgument = 2,
    /// Training could not produce a model (for example single-class labels).
    TrainingFailed = 3,
    /// An internal panic was caught at the boundary.
    Panic = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn fail(status: SflStatus, message: impl Into<Vec<u8>>) -> SflStatus {
    let text = CString::new(message).unwrap_or_else(|_| c"invalid error text".to_owned());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
    status
}

/// Returns the description of the most recent failure on this thread, or
/// null if nothing has failed yet. Owned by the library; do not free.
#[no_mangle]
pub extern "C" fn sfl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |s| s.as_ptr())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sfl_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

fn guarded(body: impl FnOnce() -> SflStatus) -> SflStatus {
    catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|_| {
        fail(
            SflStatus::Panic,
            "internal panic caught at the ffi boundary",
        )
    })
}

/// Checks a buffer shape and returns it as a borrowed matrix view.
///
/// # Safety
/// `ptr` must point to `rows * cols` readable `f64` values.
unsafe fn matrix_view<'a>(
    ptr: *const f64,
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<ArrayView2<'a, f64>, SflStatus> {
    if rows == 0 || cols == 0 {
        return Err(fail(
            SflStatus::InvalidArgument,
            format!("{what}: dimensions must be positive, got {rows}x{cols}"),
        ));
    }
    let len = rows
        .checked_mul(cols)
        .filter(|&t| t <= isize::MAX as usize / size_of::<f64>())
        .ok_or_else(|| {
            fail(
                SflStatus::InvalidArgument,
                format!("{what}: {rows}x{cols} overflows the addressable size"),
            )
        })?;
    let slice = std::slice::from_raw_parts(ptr, len);
    ArrayView2::from_shape((rows, cols), slice).map_err(|e| {
        fail(
            SflStatus::InvalidArgument,
            format!("{what}: bad shape: {e}"),
        )
    })
}

macro_rules! require_non_null {
    ($ptr:expr) => {
        if $ptr.is_null() {
            return fail(
                SflStatus::NullArgument,
                concat!(stringify!($ptr), " must not be null"),
            );
        }
    };
}

/// Training hyper-parameters for [`sfl_model_train`]. Obtain defaults with
/// [`sfl_train_options_default`] and override selectively.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SflTrainOptions {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement tolerated before stopping.
    pub early_stop_patience: usize,
    /// Fraction of training rows held out for early stopping; 0 monitors
    /// the training loss instead.
    pub validation_fraction: f64,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl SflTrainOptions {
    fn to_config(self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            early_stop_patience: self.early_stop_patience,
            validation_fraction: self.validation_fraction,
            seed: self.seed,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_epsilon: self.adam_epsilon,
        }
    }
}

/// Fills `out` with the default training options.
///
/// # Safety
/// `out` must be a valid pointer to an [`SflTrainOptions`].
#[no_mangle]
pub unsafe extern "C" fn sfl_train_options_default(out: *mut SflTrainOptions) -> SflStatus {
    guarded(|| {
        require_non_null!(out);
        let d = TrainConfig::default();
        out.write(SflTrainOptions {
            learning_rate: d.learning_rate,
            batch_size: d.batch_size,
            max_epochs: d.max_epochs,
            early_stop_patience: d.early_stop_patience,
            validation_fraction: d.validation_fraction,
            seed: d.seed,
            adam_beta1: d.adam_beta1,
            adam_beta2: d.adam_beta2,
            adam_epsilon: d.adam_epsilon,
        });
        SflStatus::Ok
    })
}

/// A trained gated fusion classifier together with the feature scalers
/// fitted on its training data.
pub struct SflModel {
    params: SflParams,
    deep_scaler: ScalerParams,
    aux_scaler: ScalerParams,
}

fn sfl_error_status(e: &SflError) -> SflStatus {
    match e {
        SflError::SingleClass => SflStatus::TrainingFailed,
        _ => SflStatus::InvalidArgument,
    }
}

/// Trains a gated fusion model.
///
/// `deep` is `n_rows * deep_dim` embeddings, `aux` is `n_rows * 4`
/// structure features, both row-major and unscaled; standardization
/// parameters are fitted here and stored in the model. `labels` holds
/// `n_rows` values in {0, 1}. `options` may be null for defaults. On
/// success `*out_model` receives a handle to release with
/// [`sfl_model_free`].
///
/// # Safety
/// All buffers must match the stated lengths; `out_model` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn sfl_model_train(
    deep: *const f64,
    n_rows: usize,
    deep_dim: usize,
    aux: *const f64,
    labels: *const u8,
    options: *const SflTrainOptions,
    out_model: *mut *mut SflModel,
) -> SflStatus {
    guarded(|| {
        require_non_null!(deep);
        require_non_null!(aux);
        require_non_null!(labels);
        require_non_null!(out_model);
        let deep_view = match matrix_view(deep, n_rows, deep_dim, "deep") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let aux_view = match matrix_view(aux, n_rows, STRUCT_DIM, "aux") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let label_slice = std::slice::from_raw_parts(labels, n_rows);
        let config = if options.is_null() {
            TrainConfig::default()
        } else {
            options.read().to_config()
        };

        let deep_scaler = match fit_scaler(deep_view) {
            Ok(s) => s,
            Err(e) => return fail(SflStatus::InvalidArgument, format!("deep scaler: {e}")),
        };
        let aux_scaler = match fit_scaler(aux_view) {
            Ok(s) => s,
            Err(e) => return fail(SflStatus::InvalidArgument, format!("aux scaler: {e}")),
        };
        let deep_scaled = transform(deep_view, &deep_scaler).expect("fitted on this shape");
        let aux_scaled = transform(aux_view, &aux_scaler).expect("fitted on this shape");

        match train(deep_scaled.view(), aux_scaled.view(), label_slice, &config) {
            Ok((params, _trace)) => {
                let model = Box::new(SflModel {
                    params,
                    deep_scaler,
                    aux_scaler,
                });
                out_model.write(Box::into_raw(model));
                SflStatus::Ok
            }
            Err(e) => fail(sfl_error_status(&e), format!("training failed: {e}")),
        }
    })
}

/// Writes the model's embedding width to `out_dim`.
///
/// # Safety
/// `model` must be a live handle from [`sfl_model_train`]; `out_dim` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sfl_model_deep_dim(
    model: *const SflModel,
    out_dim: *mut usize,
) -> SflStatus {
    guarded(|| {
        require_non_null!(model);
        require_non_null!(out_dim);
        out_dim.write((*model).params.deep_dim());
        SflStatus::Ok
    })
}

/// Predicts Class-1 probabilities for `n_rows` new rows.
///
/// Inputs are raw (unscaled) features with the same column layout as
/// training; `deep_dim` must equal the model's width. `out_probs` receives
/// `n_rows` values in [0, 1].
///
/// # Safety
/// `model` must be a live handle; buffers must match the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn sfl_model_predict(
    model: *const SflModel,
    deep: *const f64,
    n_rows: usize,
    deep_dim: usize,
    aux: *const f64,
    out_probs: *mut f64,
) -> SflStatus {
    guarded(|| {
        require_non_null!(model);
        require_non_null!(deep);
        require_non_null!(aux);
        require_non_null!(out_probs);
        let model = &*model;
        if deep_dim != model.params.deep_dim() {
            return fail(
                SflStatus::InvalidArgument,
                format!(
                    "model expects {} embedding columns, got {deep_dim}",
                    model.params.deep_dim()
                ),
            );
        }
        let deep_view = match matrix_view(deep, n_rows, deep_dim, "deep") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let aux_view = match matrix_view(aux, n_rows, STRUCT_DIM, "aux") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let deep_scaled = transform(deep_view, &model.deep_scaler).expect("width checked");
        let aux_scaled = transform(aux_view, &model.aux_scaler).expect("width fixed");
        let probs = predict_proba(&model.params, deep_scaled.view(), aux_scaled.view());
        std::ptr::copy_nonoverlapping(probs.as_ptr(), out_probs, n_rows);
        SflStatus::Ok
    })
}

/// Releases a model handle. Null is a no-op.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sfl_model_free(model: *mut SflModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Forest hyper-parameters for [`sfl_forest_train`]. Obtain defaults with
/// [`sfl_forest_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SflForestOptions {
    pub n_trees: usize,
    /// Features sampled per split; 0 selects floor(sqrt(n_features)).
    pub max_features: usize,
    pub min_samples_leaf: usize,
    /// Depth limit; 0 grows trees until leaves are pure or too small.
    pub max_depth: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl SflForestOptions {
    fn to_config(self) -> ForestConfig {
        ForestConfig {
            n_trees: self.n_trees,
            max_features: if self.max_features == 0 {
                MaxFeatures::Sqrt
            } else {
                MaxFeatures::Count(self.max_features)
            },
            min_samples_leaf: self.min_samples_leaf,
            max_depth: (self.max_depth > 0).then_some(self.max_depth),
            bootstrap: self.bootstrap,
            seed: self.seed,
        }
    }
}

/// Fills `out` with the default forest options.
///
/// # Safety
/// `out` must be a valid pointer to an [`SflForestOptions`].
#[no_mangle]
pub unsafe extern "C" fn sfl_forest_options_default(out: *mut SflForestOptions) -> SflStatus {
    guarded(|| {
        require_non_null!(out);
        let d = ForestConfig::default();
        out.write(SflForestOptions {
            n_trees: d.n_trees,
            max_features: 0,
            min_samples_leaf: d.min_samples_leaf,
            max_depth: 0,
            bootstrap: d.bootstrap,
            seed: d.seed,
        });
        SflStatus::Ok
    })
}

/// A trained random forest handle.
pub struct SflForest {
    inner: Forest,
}

fn forest_error_status(e: &ForestError) -> SflStatus {
    match e {
        ForestError::SingleClass => SflStatus::TrainingFailed,
        _ => SflStatus::InvalidArgument,
    }
}

/// Trains a random forest on `n_rows * n_features` row-major data with
/// labels in {0, 1}. `options` may be null for defaults. On success
/// `*out_forest` receives a handle to release with [`sfl_forest_free`].
///
/// # Safety
/// All buffers must match the stated lengths; `out_forest` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn sfl_forest_train(
    rows: *const f64,
    n_rows: usize,
    n_features: usize,
    labels: *const u8,
    options: *const SflForestOptions,
    out_forest: *mut *mut SflForest,
) -> SflStatus {
    guarded(|| {
        require_non_null!(rows);
        require_non_null!(labels);
        require_non_null!(out_forest);
        let view = match matrix_view(rows, n_rows, n_features, "rows") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let label_slice = std::slice::from_raw_parts(labels, n_rows);
        let config = if options.is_null() {
            ForestConfig::default()
        } else {
            options.read().to_config()
        };
        match fit_forest(view, label_slice, &config) {
            Ok(forest) => {
                out_forest.write(Box::into_raw(Box::new(SflForest { inner: forest })));
                SflStatus::Ok
            }
            Err(e) => fail(forest_error_status(&e), format!("training failed: {e}")),
        }
    })
}

/// Writes the forest's feature width to `out_n`.
///
/// # Safety
/// `forest` must be a live handle; `out_n` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sfl_forest_n_features(
    forest: *const SflForest,
    out_n: *mut usize,
) -> SflStatus {
    guarded(|| {
        require_non_null!(forest);
        require_non_null!(out_n);
        out_n.write((*forest).inner.n_features);
        SflStatus::Ok
    })
}

/// Predicts Class-1 probabilities for `n_rows` rows with the same feature
/// layout as training. `out_probs` receives `n_rows` values.
///
/// # Safety
/// `forest` must be a live handle; buffers must match the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn sfl_forest_predict(
    forest: *const SflForest,
    rows: *const f64,
    n_rows: usize,
    n_features: usize,
    out_probs: *mut f64,
) -> SflStatus {
    guarded(|| {
        require_non_null!(forest);
        require_non_null!(rows);
        require_non_null!(out_probs);
        let view = match matrix_view(rows, n_rows, n_features, "rows") {
            Ok(v) => v,
            Err(s) => return s,
        };
        match predict_proba_forest(&(*forest).inner, view) {
            Ok(probs) => {
                std::ptr::copy_nonoverlapping(probs.as_ptr(), out_probs, n_rows);
                SflStatus::Ok
            }
            Err(e) => fail(
                SflStatus::InvalidArgument,
                format!("prediction failed: {e}"),
            ),
        }
    })
}

/// Writes the forest's normalized impurity-decrease importances, one per
/// feature, to `out_importances`. `len` must equal the feature width.
///
/// # Safety
/// `forest` must be a live handle; `out_importances` must hold `len`
/// writable values.
#[no_mangle]
pub unsafe extern "C" fn sfl_forest_mdi(
    forest: *const SflForest,
    out_importances: *mut f64,
    len: usize,
) -> SflStatus {
    guarded(|| {
        require_non_null!(forest);
        require_non_null!(out_importances);
        let forest = &(*forest).inner;
        if len != forest.n_features {
            return fail(
                SflStatus::InvalidArgument,
                format!(
                    "forest has {} features, buffer holds {len}",
                    forest.n_features
                ),
            );
        }
        let mdi = mdi_importances(forest);
        std::ptr::copy_nonoverlapping(mdi.as_ptr(), out_importances, len);
        SflStatus::Ok
    })
}

/// Releases a forest handle. Null is a no-op.
///
/// # Safety
/// `forest` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sfl_forest_free(forest: *mut SflForest) {
    if !forest.is_null() {
        drop(Box::from_raw(forest));
    }
}

/// The headline evaluation metrics for one probability vector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SflEvalSummary {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub mcc: f64,
    pub brier: f64,
    pub log_loss: f64,
    pub ece: f64,
    pub auc: f64,
    pub average_precision: f64,
}

/// Evaluates `n` (label, probability) pairs at the 0.5 threshold and fills
/// `out` with the summary metrics. Labels must be in {0, 1} and include
/// both classes; probabilities must lie in [0, 1].
///
/// # Safety
/// `labels` and `probs` must hold `n` readable values; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sfl_evaluate(
    labels: *const u8,
    probs: *const f64,
    n: usize,
    out: *mut SflEvalSummary,
) -> SflStatus {
    guarded(|| {
        require_non_null!(labels);
        require_non_null!(probs);
        require_non_null!(out);
        let label_slice = std::slice::from_raw_parts(labels, n);
        let prob_slice = std::slice::from_raw_parts(probs, n);
        match evaluate(label_slice, prob_slice) {
            Ok(report) => {
                out.write(SflEvalSummary {
                    accuracy: report.accuracy,
                    macro_f1: report.macro_f1,
                    mcc: report.mcc,
                    brier: report.brier,
                    log_loss: report.log_loss,
                    ece: report.ece,
                    auc: report.roc.auc,
                    average_precision: report.pr.average_precision,
                });
                SflStatus::Ok
            }
            Err(e) => fail(
                SflStatus::InvalidArgument,
                format!("evaluation failed: {e}"),
            ),
        }
    })
}
