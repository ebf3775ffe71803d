//! C ABI for hybrid-cascade.
//!
//! Every function returns an [`HcStatus`]. On failure the message is
//! available from [`hc_last_error`] on the same thread until the next call.
//! Objects are opaque handles created by `*_new`/`*_load`/`*_generate`/
//! `*_train`/`*_estimate` functions and released with the matching
//! `*_free`. Class labels are 1-based, as in the Rust library.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use hybrid_cascade::classifiers::{
    pairwise_coupling, train_multiclass, Assignment, Kernel, MulticlassModel, Preprocess, Query, Strategy,
    TrainParams,
};
use hybrid_cascade::datasets::{generate_synthetic, load_dataset, Dataset, DatasetFormat, SyntheticSpec};
use hybrid_cascade::features::raw_features;
use hybrid_cascade::harness::{cohen_kappa, ConfusionMatrix};
use hybrid_cascade::hybrid::{estimate_error_histograms, select_for_reclassification, BinnedAssignments, ErrorHistogram};
use hybrid_cascade::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HcStatus {
    Ok = 0,
    /// Null pointer, bad enum value, invalid UTF-8 or similar misuse.
    Usage = 1,
    /// Invalid or missing data.
    Data = 2,
    /// Convergence, calibration or coupling failure.
    Convergence = 3,
    /// A Rust panic was caught at the boundary.
    Panic = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HcStrategy {
    Ova = 0,
    Ovo = 1,
    Probabilistic = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HcFormat {
    Tabular = 0,
    ImageManifest = 1,
}

/// Options for [`hc_model_train`]. `gamma <= 0` selects the linear kernel.
/// `column_end == 0` uses every column.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HcTrainOptions {
    pub strategy: HcStrategy,
    pub c: f64,
    pub gamma: f64,
    pub seed: u64,
    pub column_start: usize,
    pub column_end: usize,
}

pub struct HcDataset(Dataset);
pub struct HcModel(MulticlassModel);
pub struct HcHistogram(ErrorHistogram);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

type Outcome<T = ()> = Result<T, Fail>;

fn guard(f: impl FnOnce() -> Outcome) -> HcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HcStatus::Ok,
        Ok(Err(Fail::Usage(m))) => {
            set_error(m);
            HcStatus::Usage
        }
        Ok(Err(Fail::Lib(e))) => {
            let status = if e.exit_code() == 3 { HcStatus::Convergence } else { HcStatus::Data };
            set_error(e.to_string());
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            HcStatus::Panic
        }
    }
}

fn usage(m: &str) -> Fail {
    Fail::Usage(m.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Outcome<&'a str> {
    if p.is_null() {
        return Err(Fail::Usage(format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Usage(format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Outcome<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Usage(format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Outcome<&'a T> {
    p.as_ref().ok_or_else(|| Fail::Usage(format!("{what} is null")))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Outcome {
    if out.is_null() {
        return Err(Fail::Usage(format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn hc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Synthetic dataset from a named preset (`lar2`, `egg9`, `pro7`).
///
/// # Safety
/// `preset` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hc_dataset_generate(
    preset: *const c_char,
    scale: f64,
    seed: u64,
    out: *mut *mut HcDataset,
) -> HcStatus {
    guard(|| {
        let name = str_arg(preset, "preset")?;
        let spec = SyntheticSpec::by_name(name, scale).ok_or_else(|| Fail::Usage(format!("unknown preset '{name}'")))?;
        let ds = generate_synthetic(&spec, seed)?;
        put(out, Box::into_raw(Box::new(HcDataset(ds))), "out")
    })
}

/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hc_dataset_load(path: *const c_char, format: HcFormat, out: *mut *mut HcDataset) -> HcStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        let format = match format {
            HcFormat::Tabular => DatasetFormat::Tabular,
            HcFormat::ImageManifest => DatasetFormat::ImageManifest,
        };
        let ds = load_dataset(&path, format)?;
        put(out, Box::into_raw(Box::new(HcDataset(ds))), "out")
    })
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn hc_dataset_len(ds: *const HcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// Number of classes, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn hc_dataset_classes(ds: *const HcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.m)
}

/// Feature dimension, or 0 when samples carry images instead.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn hc_dataset_dim(ds: *const HcDataset) -> usize {
    ds.as_ref().and_then(|d| d.0.feature_dim()).unwrap_or(0)
}

/// Copy the raw feature row and label of sample `index`. `row` must hold
/// `hc_dataset_dim` values.
///
/// # Safety
/// `ds` must be a live handle, `row` valid for `dim` writes, `label` valid.
#[no_mangle]
pub unsafe extern "C" fn hc_dataset_sample(
    ds: *const HcDataset,
    index: usize,
    row: *mut f64,
    dim: usize,
    label: *mut usize,
) -> HcStatus {
    guard(|| {
        let d = &handle(ds, "dataset")?.0;
        let s = d
            .samples
            .get(index)
            .ok_or_else(|| Fail::Usage(format!("index {index} out of range")))?;
        let f = raw_features(s)?.values;
        if f.len() != dim {
            return Err(Fail::Usage(format!("row has {} values, buffer holds {dim}", f.len())));
        }
        if row.is_null() {
            return Err(usage("row is null"));
        }
        std::slice::from_raw_parts_mut(row, dim).copy_from_slice(&f);
        put(label, s.label, "label")
    })
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hc_dataset_free(ds: *mut HcDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Train a multiclass SVM on every sample of `ds` with standardized
/// features and fixed hyper-parameters.
///
/// # Safety
/// `ds` must be a live handle, `opts` and `out` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hc_model_train(
    ds: *const HcDataset,
    opts: *const HcTrainOptions,
    out: *mut *mut HcModel,
) -> HcStatus {
    guard(|| {
        let d = &handle(ds, "dataset")?.0;
        let o = *handle(opts, "options")?;
        let columns = (o.column_end > 0).then_some(o.column_start..o.column_end);
        let raw = d
            .samples
            .iter()
            .map(|s| raw_features(s).map(|f| f.values))
            .collect::<Result<Vec<_>, _>>()?;
        let pre = Preprocess::fit(&raw, columns, None)?;
        let x = pre.apply_all(&raw)?;
        let kernel = if o.gamma > 0.0 { Kernel::Rbf { gamma: o.gamma } } else { Kernel::Linear };
        let strategy = match o.strategy {
            HcStrategy::Ova => Strategy::Ova,
            HcStrategy::Ovo => Strategy::Ovo,
            HcStrategy::Probabilistic => Strategy::Probabilistic,
        };
        let params = TrainParams {
            seed: o.seed,
            ..TrainParams::new(kernel, o.c)
        };
        let model = train_multiclass(&x, &d.labels(), d.m, strategy, &params)?.with_preprocess(pre);
        put(out, Box::into_raw(Box::new(HcModel(model))), "out")
    })
}

/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hc_model_load(path: *const c_char, out: *mut *mut HcModel) -> HcStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        let model = MulticlassModel::load(&path)?;
        put(out, Box::into_raw(Box::new(HcModel(model))), "out")
    })
}

/// # Safety
/// `model` must be a live handle and `path` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn hc_model_save(model: *const HcModel, path: *const c_char) -> HcStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        m.save(&PathBuf::from(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// Number of classes, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hc_model_classes(model: *const HcModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.m)
}

/// Classify one raw feature row. `probs`, when not null, receives one
/// probability per class for the probabilistic strategy and is left
/// untouched otherwise.
///
/// # Safety
/// `model` must be a live handle, `features` valid for `dim` reads, the
/// output pointers valid, `probs` null or valid for `m` writes.
#[no_mangle]
pub unsafe extern "C" fn hc_model_classify(
    model: *const HcModel,
    features: *const f64,
    dim: usize,
    class_out: *mut usize,
    confidence_out: *mut f64,
    probs: *mut f64,
) -> HcStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        let f = slice_arg(features, dim, "features")?;
        let a = m.classify_query(&Query::tabular("0", f))?;
        if let (Some(p), false) = (&a.probs, probs.is_null()) {
            std::slice::from_raw_parts_mut(probs, p.len()).copy_from_slice(p);
        }
        put(class_out, a.class, "class_out")?;
        put(confidence_out, a.confidence, "confidence_out")
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hc_model_free(model: *mut HcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn assignments(classes: *const usize, confidence: *const f64, len: usize) -> Outcome<Vec<Assignment>> {
    let classes = slice_arg(classes, len, "classes")?;
    let confidence = slice_arg(confidence, len, "confidence")?;
    Ok(classes
        .iter()
        .zip(confidence)
        .enumerate()
        .map(|(i, (&class, &confidence))| Assignment {
            id: i.to_string(),
            class,
            confidence,
            probs: None,
        })
        .collect())
}

/// Error histogram over `n` confidence bins from validation predictions.
///
/// # Safety
/// The three arrays must be valid for `len` reads; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hc_histogram_estimate(
    classes: *const usize,
    confidence: *const f64,
    truth: *const usize,
    len: usize,
    m: usize,
    n: usize,
    smoothing: bool,
    out: *mut *mut HcHistogram,
) -> HcStatus {
    guard(|| {
        let a = assignments(classes, confidence, len)?;
        let truth = slice_arg(truth, len, "truth")?;
        let h = estimate_error_histograms(&a, truth, m, n, smoothing)?;
        put(out, Box::into_raw(Box::new(HcHistogram(h))), "out")
    })
}

/// Estimated error probability of a cell, both indices 1-based; NaN when
/// out of range or for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hc_histogram_get(h: *const HcHistogram, class: usize, bin: usize) -> f64 {
    match h.as_ref() {
        Some(h) if (1..=h.0.m).contains(&class) && (1..=h.0.n).contains(&bin) => h.0.get(class, bin),
        _ => f64::NAN,
    }
}

/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hc_histogram_load(path: *const c_char, out: *mut *mut HcHistogram) -> HcStatus {
    guard(|| {
        let h = ErrorHistogram::load(&PathBuf::from(str_arg(path, "path")?))?;
        put(out, Box::into_raw(Box::new(HcHistogram(h))), "out")
    })
}

/// # Safety
/// `h` must be a live handle and `path` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn hc_histogram_save(h: *const HcHistogram, path: *const c_char) -> HcStatus {
    guard(|| {
        handle(h, "histogram")?.0.save(&PathBuf::from(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hc_histogram_free(h: *mut HcHistogram) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Choose up to `budget` of `len` DS1 predictions for reclassification.
/// Selected positions are written to `selected` (capacity `len`) in
/// selection order and their number to `count`.
///
/// # Safety
/// `h` must be a live handle; `classes`/`confidence` valid for `len`
/// reads; `selected` valid for `len` writes; `count` valid.
#[no_mangle]
pub unsafe extern "C" fn hc_select(
    h: *const HcHistogram,
    classes: *const usize,
    confidence: *const f64,
    len: usize,
    budget: usize,
    seed: u64,
    selected: *mut usize,
    count: *mut usize,
) -> HcStatus {
    guard(|| {
        let h = &handle(h, "histogram")?.0;
        let a = assignments(classes, confidence, len)?;
        let binned = BinnedAssignments::new(&a, h.n)?;
        let plan = select_for_reclassification(&binned, h, budget, seed)?;
        let picked: Vec<usize> = plan
            .selected()
            .into_iter()
            .map(|id| id.parse().expect("ids are positions"))
            .collect();
        if !picked.is_empty() {
            if selected.is_null() {
                return Err(usage("selected is null"));
            }
            std::slice::from_raw_parts_mut(selected, picked.len()).copy_from_slice(&picked);
        }
        put(count, picked.len(), "count")
    })
}

/// Cohen's kappa of an `m`×`m` row-major confusion matrix (rows are true
/// classes).
///
/// # Safety
/// `counts` must be valid for `m * m` reads and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hc_cohen_kappa(counts: *const u64, m: usize, out: *mut f64) -> HcStatus {
    guard(|| {
        let flat = slice_arg(counts, m.checked_mul(m).ok_or_else(|| usage("m too large"))?, "counts")?;
        let rows = flat.chunks(m.max(1)).map(<[u64]>::to_vec).collect();
        let cm = ConfusionMatrix::from_counts(rows)?;
        put(out, cohen_kappa(&cm)?, "out")
    })
}

/// Multiclass probabilities from an `m`×`m` row-major matrix of pairwise
/// estimates r[i][j] ≈ P(i | i or j). The diagonal is ignored.
///
/// # Safety
/// `r` must be valid for `m * m` reads and `p` for `m` writes.
#[no_mangle]
pub unsafe extern "C" fn hc_pairwise_coupling(r: *const f64, m: usize, p: *mut f64) -> HcStatus {
    guard(|| {
        let flat = slice_arg(r, m.checked_mul(m).ok_or_else(|| usage("m too large"))?, "r")?;
        let rows: Vec<Vec<f64>> = flat.chunks(m.max(1)).map(<[f64]>::to_vec).collect();
        let probs = pairwise_coupling(&rows)?;
        if p.is_null() {
            return Err(usage("p is null"));
        }
        std::slice::from_raw_parts_mut(p, probs.len()).copy_from_slice(&probs);
        Ok(())
    })
}
