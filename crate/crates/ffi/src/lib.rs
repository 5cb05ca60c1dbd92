//! C interface to the synthesis library.
//!
//! Datasets and fitted models cross the boundary as opaque handles created
//! by `ctes_*` constructors and released with the matching `*_free`
//! function. Every fallible call returns a [`CtesStatus`]; on failure
//! [`ctes_last_error_message`] describes the most recent error on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use ctes::baselines::Method;
use ctes::cli::{load_model, save_model, ModelFile};
use ctes::datagen::{gen_multivariate_dataset, read_dataset, PairedDataset, SimConfig};
use ctes::eval::{fit_method, MethodSettings};
use ctes::rng::seeded;
use ctes::Error;

/// Result codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtesStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Input = 4,
    Training = 5,
    Parse = 6,
    Version = 7,
    Io = 8,
    BufferTooSmall = 9,
    Internal = 10,
}

/// Opaque paired dataset.
pub struct CtesDataset {
    inner: PairedDataset,
}

/// Opaque fitted model with its settings and seed.
pub struct CtesModel {
    inner: ModelFile,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn status_of(e: &Error) -> CtesStatus {
    match e {
        Error::Config(_) => CtesStatus::Config,
        Error::Input(_) | Error::MismatchImpossible | Error::UndefinedMetric(_) => {
            CtesStatus::Input
        }
        Error::TrainingFault(_)
        | Error::Diverged { .. }
        | Error::Ensemble(_)
        | Error::Sampling(_) => CtesStatus::Training,
        Error::Parse { .. } | Error::Csv(_) => CtesStatus::Parse,
        Error::Version { .. } => CtesStatus::Version,
        Error::Io(_) => CtesStatus::Io,
    }
}

struct Failure(CtesStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(CtesStatus::InvalidArgument, message.into())
}

/// Runs `body`, records any error or panic and converts it to a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CtesStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CtesStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CtesStatus::Internal
        }
    }
}

unsafe fn text<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(Failure(CtesStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref()
        .ok_or_else(|| Failure(CtesStatus::NullPointer, format!("{what} is null")))
}

fn out_ptr<T>(ptr: *mut T, what: &str) -> Result<(), Failure> {
    if ptr.is_null() {
        Err(Failure(CtesStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message for the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ctes_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ctes_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Simulates the multivariate benchmark: `groups` groups of
/// `samples_per_group` rows with two characteristics and six expressions.
///
/// # Safety
/// `out` must be a valid pointer to writable handle storage.
#[no_mangle]
pub unsafe extern "C" fn ctes_dataset_simulate(
    sigma: f64,
    samples_per_group: usize,
    groups: usize,
    seed: u64,
    out: *mut *mut CtesDataset,
) -> CtesStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let inner = gen_multivariate_dataset(&SimConfig {
            sigma,
            samples_per_group,
            groups,
            seed,
            ..SimConfig::default()
        })?;
        *out = Box::into_raw(Box::new(CtesDataset { inner }));
        Ok(())
    })
}

/// Reads a dataset CSV with `x*`, `y*` and `group` columns.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid handle storage.
#[no_mangle]
pub unsafe extern "C" fn ctes_dataset_load_csv(
    path: *const c_char,
    out: *mut *mut CtesDataset,
) -> CtesStatus {
    guard(|| {
        let path = text(path, "path")?;
        out_ptr(out, "out")?;
        let file = File::open(path).map_err(Error::from)?;
        let inner = read_dataset(file)?;
        *out = Box::into_raw(Box::new(CtesDataset { inner }));
        Ok(())
    })
}

/// Row count and the characteristic and expression widths.
///
/// # Safety
/// `dataset` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctes_dataset_shape(
    dataset: *const CtesDataset,
    rows: *mut usize,
    char_dim: *mut usize,
    expr_dim: *mut usize,
) -> CtesStatus {
    guard(|| {
        let ds = &handle(dataset, "dataset")?.inner;
        out_ptr(rows, "rows")?;
        out_ptr(char_dim, "char_dim")?;
        out_ptr(expr_dim, "expr_dim")?;
        *rows = ds.len();
        *char_dim = ds.char_dim();
        *expr_dim = ds.expr_dim();
        Ok(())
    })
}

/// Copies row-major characteristics into `out`, which holds `capacity`
/// values.
///
/// # Safety
/// `dataset` must be a live handle and `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn ctes_dataset_characteristics(
    dataset: *const CtesDataset,
    out: *mut f64,
    capacity: usize,
) -> CtesStatus {
    guard(|| {
        let ds = &handle(dataset, "dataset")?.inner;
        out_ptr(out, "out")?;
        write_rows(&ds.characteristics, out, capacity)
    })
}

/// Releases a dataset handle. Null is ignored.
///
/// # Safety
/// `dataset` must come from a `ctes_dataset_*` constructor and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn ctes_dataset_free(dataset: *mut CtesDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Fits `method` (`pls`, `grnn`, `cgan`, `gan-cls`, `ctes` or `se-ctes`) on
/// the dataset. `settings_json` may be null for defaults or a JSON object
/// with any of `train`, `k`, `h`, `inverse_classifier`, `pls_components`
/// and `grnn_bandwidth`.
///
/// # Safety
/// `dataset` must be a live handle, the strings NUL-terminated (or null for
/// `settings_json`) and `out` valid handle storage.
#[no_mangle]
pub unsafe extern "C" fn ctes_model_train(
    dataset: *const CtesDataset,
    method: *const c_char,
    settings_json: *const c_char,
    seed: u64,
    out: *mut *mut CtesModel,
) -> CtesStatus {
    guard(|| {
        let ds = &handle(dataset, "dataset")?.inner;
        let method: Method = text(method, "method")?.parse()?;
        let settings: MethodSettings = if settings_json.is_null() {
            MethodSettings::default()
        } else {
            serde_json::from_str(text(settings_json, "settings_json")?).map_err(|e| {
                Failure(
                    CtesStatus::Parse,
                    format!("settings at line {}, column {}: {e}", e.line(), e.column()),
                )
            })?
        };
        out_ptr(out, "out")?;
        let model = fit_method(method, &settings, ds, seed)?;
        let inner = ModelFile::new(method.name(), seed, settings, model);
        *out = Box::into_raw(Box::new(CtesModel { inner }));
        Ok(())
    })
}

/// Loads a model file written by [`ctes_model_save`] or the command line.
///
/// # Safety
/// `path` must be NUL-terminated and `out` valid handle storage.
#[no_mangle]
pub unsafe extern "C" fn ctes_model_load(
    path: *const c_char,
    out: *mut *mut CtesModel,
) -> CtesStatus {
    guard(|| {
        let path = PathBuf::from(text(path, "path")?);
        out_ptr(out, "out")?;
        let inner = load_model(&path)?;
        *out = Box::into_raw(Box::new(CtesModel { inner }));
        Ok(())
    })
}

/// Writes the model as JSON.
///
/// # Safety
/// `model` must be a live handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ctes_model_save(
    model: *const CtesModel,
    path: *const c_char,
) -> CtesStatus {
    guard(|| {
        let m = &handle(model, "model")?.inner;
        let path = PathBuf::from(text(path, "path")?);
        save_model(m, &path)?;
        Ok(())
    })
}

/// Characteristic and expression widths of a fitted model.
///
/// # Safety
/// `model` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctes_model_dims(
    model: *const CtesModel,
    char_dim: *mut usize,
    expr_dim: *mut usize,
) -> CtesStatus {
    guard(|| {
        let m = &handle(model, "model")?.inner;
        out_ptr(char_dim, "char_dim")?;
        out_ptr(expr_dim, "expr_dim")?;
        (*char_dim, *expr_dim) = m.model.dims();
        Ok(())
    })
}

/// Synthesizes one expression per characteristic row. `characteristics`
/// holds `rows * char_dim` row-major values; `out` receives
/// `rows * expr_dim` values and holds `capacity`.
///
/// # Safety
/// `model` must be a live handle, `characteristics` must hold
/// `rows * char_dim` doubles and `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn ctes_model_synthesize(
    model: *const CtesModel,
    characteristics: *const f64,
    rows: usize,
    char_dim: usize,
    seed: u64,
    out: *mut f64,
    capacity: usize,
) -> CtesStatus {
    guard(|| {
        let m = &handle(model, "model")?.inner;
        if characteristics.is_null() {
            return Err(Failure(
                CtesStatus::NullPointer,
                "characteristics is null".into(),
            ));
        }
        out_ptr(out, "out")?;
        if rows == 0 {
            return Err(invalid("rows must be positive"));
        }
        let (m_dim, n_dim) = m.model.dims();
        if char_dim != m_dim {
            return Err(invalid(format!(
                "model expects {m_dim} characteristics, got {char_dim}"
            )));
        }
        let needed = rows
            .checked_mul(n_dim)
            .ok_or_else(|| invalid("output size overflows"))?;
        if capacity < needed {
            return Err(Failure(
                CtesStatus::BufferTooSmall,
                format!("output needs {needed} values, buffer holds {capacity}"),
            ));
        }
        let flat = std::slice::from_raw_parts(characteristics, rows * char_dim);
        let xs: Vec<Vec<f64>> = flat.chunks(char_dim).map(<[f64]>::to_vec).collect();
        let ys = m.model.synthesize_for(&xs, &mut seeded(seed))?;
        write_rows(&ys, out, capacity)
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must come from `ctes_model_train` or `ctes_model_load` and not
/// be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ctes_model_free(model: *mut CtesModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn write_rows(rows: &[Vec<f64>], out: *mut f64, capacity: usize) -> Result<(), Failure> {
    let needed: usize = rows.iter().map(Vec::len).sum();
    if capacity < needed {
        return Err(Failure(
            CtesStatus::BufferTooSmall,
            format!("output needs {needed} values, buffer holds {capacity}"),
        ));
    }
    let dst = std::slice::from_raw_parts_mut(out, needed);
    for (slot, v) in dst.iter_mut().zip(rows.iter().flatten()) {
        *slot = *v;
    }
    Ok(())
}
