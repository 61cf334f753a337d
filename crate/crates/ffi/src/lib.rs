//! C ABI over the clustering, evaluation and embedder inference parts of
//! `plankton`.
//!
//! Every fallible function returns a [`PlkStatus`]; on failure the message is
//! kept per thread and read with [`plk_last_error`]. Models are opaque
//! handles released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use plankton::clustering::{self, ClusterModel, FuzzyConfig};
use plankton::embedder::{encode, EmbedderModel};
use plankton::nn::Checkpoint;
use plankton::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Shape = 4,
    Format = 5,
    Panic = 6,
}

/// Fitted fuzzy c-means centroids.
pub struct PlkClusterModel(ClusterModel);

/// Trained AE/VAE loaded from a checkpoint.
pub struct PlkEmbedder(EmbedderModel<f32>);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> PlkStatus {
    match e {
        Error::Io { .. } => PlkStatus::Io,
        Error::Shape { .. } => PlkStatus::Shape,
        Error::Checkpoint(_) | Error::Json(_) | Error::Csv(_) | Error::Checksum { .. } => PlkStatus::Format,
        _ => PlkStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), PlkStatus>) -> PlkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PlkStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            PlkStatus::Panic
        }
    }
}

fn fail(e: Error) -> PlkStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn invalid(msg: &str) -> PlkStatus {
    set_error(msg.to_string());
    PlkStatus::InvalidArgument
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), PlkStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        Err(PlkStatus::NullPointer)
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or point to `n` readable values.
unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], PlkStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, PlkStatus> {
    non_null(p, "path")?;
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| invalid("path is not UTF-8"))
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length.
///
/// # Safety
/// `buf` must be null or writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn plk_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn plk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Fraction of points whose cluster's majority class equals their own.
///
/// # Safety
/// `clusters` and `classes` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plk_purity(
    clusters: *const usize,
    classes: *const usize,
    n: usize,
    out: *mut f64,
) -> PlkStatus {
    guard(|| {
        non_null(out, "out")?;
        let c = slice(clusters, n, "clusters")?;
        let y = slice(classes, n, "classes")?;
        *out = plankton::metrics::purity(c, y).map_err(fail)?;
        Ok(())
    })
}

/// Number of class collisions: classes sharing a majority cluster.
///
/// # Safety
/// As [`plk_purity`].
#[no_mangle]
pub unsafe extern "C" fn plk_overlaps(
    clusters: *const usize,
    classes: *const usize,
    n: usize,
    out: *mut usize,
) -> PlkStatus {
    guard(|| {
        non_null(out, "out")?;
        let c = slice(clusters, n, "clusters")?;
        let y = slice(classes, n, "classes")?;
        *out = plankton::metrics::overlaps(c, y).map_err(fail)?;
        Ok(())
    })
}

/// Fits fuzzy c-means on `n` row-major points of length `dim`.
///
/// # Safety
/// `points` must hold `n * dim` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plk_cluster_fit(
    points: *const f64,
    n: usize,
    dim: usize,
    n_clusters: usize,
    m: f64,
    tol: f64,
    max_iter: usize,
    seed: u64,
    out: *mut *mut PlkClusterModel,
) -> PlkStatus {
    guard(|| {
        non_null(out, "out")?;
        if dim == 0 {
            return Err(invalid("dim must be positive"));
        }
        let total = n.checked_mul(dim).ok_or_else(|| invalid("n * dim overflows"))?;
        let flat = slice(points, total, "points")?;
        let rows: Vec<&[f64]> = flat.chunks_exact(dim).collect();
        let config = FuzzyConfig {
            n_clusters,
            m,
            tol,
            max_iter,
            seed,
        };
        let model = clustering::fit(&rows, &config).map_err(fail)?;
        *out = Box::into_raw(Box::new(PlkClusterModel(model)));
        Ok(())
    })
}

/// Loads a cluster model saved as JSON.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plk_cluster_load(path: *const c_char, out: *mut *mut PlkClusterModel) -> PlkStatus {
    guard(|| {
        non_null(out, "out")?;
        let model = ClusterModel::load(&path_arg(path)?).map_err(fail)?;
        *out = Box::into_raw(Box::new(PlkClusterModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn plk_cluster_save(model: *const PlkClusterModel, path: *const c_char) -> PlkStatus {
    guard(|| {
        non_null(model, "model")?;
        (*model).0.save(&path_arg(path)?).map_err(fail)
    })
}

/// # Safety
/// `model` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn plk_cluster_n_clusters(model: *const PlkClusterModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.n_clusters())
}

/// # Safety
/// `model` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn plk_cluster_dim(model: *const PlkClusterModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.dim())
}

/// Writes the `n × n_clusters` membership matrix of new points against the
/// frozen centroids.
///
/// # Safety
/// `points` must hold `n * dim` values and `out` `n * n_clusters`.
#[no_mangle]
pub unsafe extern "C" fn plk_cluster_assign(
    model: *const PlkClusterModel,
    points: *const f64,
    n: usize,
    m: f64,
    out: *mut f64,
) -> PlkStatus {
    guard(|| {
        non_null(model, "model")?;
        let model = &(*model).0;
        let dim = model.dim();
        let k = model.n_clusters();
        let flat = slice(points, n * dim, "points")?;
        let rows: Vec<&[f64]> = flat.chunks_exact(dim.max(1)).collect();
        let u = model.assign(&rows, m).map_err(fail)?;
        if n > 0 {
            non_null(out, "out")?;
            let dst = std::slice::from_raw_parts_mut(out, n * k);
            for (d, row) in dst.chunks_exact_mut(k).zip(&u) {
                d.copy_from_slice(row);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn plk_cluster_free(model: *mut PlkClusterModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Loads an embedder checkpoint.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plk_embedder_load(path: *const c_char, out: *mut *mut PlkEmbedder) -> PlkStatus {
    guard(|| {
        non_null(out, "out")?;
        let ckpt = Checkpoint::load(&path_arg(path)?).map_err(fail)?;
        let model = EmbedderModel::from_checkpoint(&ckpt).map_err(fail)?;
        *out = Box::into_raw(Box::new(PlkEmbedder(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn plk_embedder_latent_dim(model: *const PlkEmbedder) -> usize {
    model.as_ref().map_or(0, |m| m.0.latent_dim())
}

/// Element count of one input sample.
///
/// # Safety
/// `model` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn plk_embedder_input_len(model: *const PlkEmbedder) -> usize {
    model.as_ref().map_or(0, |m| m.0.config().input_shape.len())
}

/// Embeds `n` samples (row-major, `input_len` each) into `n × latent_dim`.
///
/// # Safety
/// `samples` must hold `n * input_len` values and `out` `n * latent_dim`.
#[no_mangle]
pub unsafe extern "C" fn plk_embedder_encode(
    model: *const PlkEmbedder,
    samples: *const f32,
    n: usize,
    out: *mut f32,
) -> PlkStatus {
    guard(|| {
        non_null(model, "model")?;
        let model = &(*model).0;
        let len = model.config().input_shape.len();
        let z = model.latent_dim();
        let flat = slice(samples, n * len, "samples")?;
        let rows: Vec<&[f32]> = flat.chunks_exact(len).collect();
        let codes = encode(model, &rows).map_err(fail)?;
        if n > 0 {
            non_null(out, "out")?;
            let dst = std::slice::from_raw_parts_mut(out, n * z);
            for (d, c) in dst.chunks_exact_mut(z).zip(&codes) {
                d.copy_from_slice(c);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn plk_embedder_free(model: *mut PlkEmbedder) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
