//! C ABI over the measure and metric layer of `mkvlab`.
//!
//! The surface is deliberately small: empirical samples and grid densities
//! as opaque handles, kernel density estimation to turn one into the other,
//! and the distances defined on them (lattice k*-norm, total variation,
//! relative entropy, Wasserstein). Everything else in the library stays
//! Rust-only.
//!
//! Conventions shared by every function:
//! - Returns [`MkvStatus`]; `MKV_STATUS_OK` is zero and all failures leave a
//!   human-readable message retrievable with [`mkv_last_error`].
//! - Out-parameters are written only on success.
//! - Handles are created and released in pairs (`*_create`/`*_estimate` and
//!   `*_free`); free functions accept null and never report errors.
//! - Panics cannot cross the boundary; they are caught and reported as
//!   `MKV_STATUS_NUMERIC_FAILURE`.
//!
//! The committed header `include/mkvlab.h` is generated from this file with
//! cbindgen and kept in sync by a test.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use mkvlab::measure::{
    kde::{auto_grid, default_axis_count, kde_estimate, silverman_bandwidth},
    Density, EmpiricalMeasure, Grid, InitialLaw,
};
use mkvlab::metrics::{
    entropy::{relative_entropy, tv_distance},
    kstar::{kstar_distance, kstar_norm_surrogate},
    wasserstein::wasserstein_q,
    Exponent, KStarParams,
};
use mkvlab::Error;

/// Status code returned by every fallible function in this ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MkvStatus {
    /// The call succeeded and all out-parameters are valid.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Arguments were non-null but invalid (wrong sizes, bad exponents, ...).
    InvalidArgument = 2,
    /// The computation itself failed (non-finite values, internal panic).
    NumericFailure = 3,
    /// A caller-provided buffer is shorter than the data to be written.
    BufferTooSmall = 4,
}

/// Opaque empirical measure: `n` points in `R^d` with equal weights.
pub struct MkvSample(EmpiricalMeasure);

/// Opaque probability density on a uniform rectangular grid.
pub struct MkvDensity(Density);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl std::fmt::Display) {
    let text = msg.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        // Interior NULs were just stripped, so this cannot fail.
        *slot.borrow_mut() = CString::new(text).unwrap_or_default();
    });
}

fn fail(err: Error) -> MkvStatus {
    let status = match err {
        Error::Parameter(_) | Error::Config(_) | Error::Shape(_) => MkvStatus::InvalidArgument,
        _ => MkvStatus::NumericFailure,
    };
    set_error(err);
    status
}

fn null_arg(name: &str) -> MkvStatus {
    set_error(format!("argument '{name}' is null"));
    MkvStatus::NullPointer
}

/// Runs `f` with a panic guard so unwinding never crosses the C boundary.
fn guarded(f: impl FnOnce() -> MkvStatus) -> MkvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic; state may be inconsistent");
            MkvStatus::NumericFailure
        }
    }
}

fn exponent_from(k: f64) -> Exponent {
    if k.is_infinite() && k > 0.0 {
        Exponent::Infinity
    } else {
        Exponent::Finite(k)
    }
}

/// Library version as a static NUL-terminated string; never null, never freed.
#[no_mangle]
pub extern "C" fn mkv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the message from the most recent failure on this thread into `buf`.
///
/// Returns the full message length in bytes including the trailing NUL. At
/// most `cap` bytes are written and the output is always NUL-terminated when
/// `cap > 0`, so a return value larger than `cap` signals truncation. A null
/// `buf` or zero `cap` writes nothing and just reports the required length.
///
/// # Safety
///
/// `buf` must be null or valid for writing `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn mkv_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            // Truncated copies still terminate cleanly.
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Creates an empirical measure from `n_points` points of dimension `dim`,
/// read from `coords` as `n_points * dim` doubles in point-major order.
///
/// On success writes a handle to `out`; release it with [`mkv_sample_free`].
///
/// # Safety
///
/// `coords` must be valid for reading `n_points * dim` doubles and `out`
/// must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn mkv_sample_create(
    dim: usize,
    n_points: usize,
    coords: *const f64,
    out: *mut *mut MkvSample,
) -> MkvStatus {
    if out.is_null() {
        return null_arg("out");
    }
    if coords.is_null() {
        return null_arg("coords");
    }
    let Some(len) = n_points.checked_mul(dim) else {
        set_error("n_points * dim overflows");
        return MkvStatus::InvalidArgument;
    };
    let flat = std::slice::from_raw_parts(coords, len).to_vec();
    guarded(|| match EmpiricalMeasure::new(dim, flat) {
        Ok(sample) => {
            out.write(Box::into_raw(Box::new(MkvSample(sample))));
            MkvStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// Draws `n_points` points from the standard Gaussian in dimension `dim`.
///
/// The draw is a pure function of `(dim, n_points, seed)`, identical across
/// platforms and thread counts. Release the handle with [`mkv_sample_free`].
///
/// # Safety
///
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn mkv_sample_gaussian(
    dim: usize,
    n_points: usize,
    seed: u64,
    out: *mut *mut MkvSample,
) -> MkvStatus {
    if out.is_null() {
        return null_arg("out");
    }
    guarded(|| {
        let law = InitialLaw::Gaussian {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        };
        match law.validate().and_then(|()| law.sample(n_points, seed)) {
            Ok(sample) => {
                out.write(Box::into_raw(Box::new(MkvSample(sample))));
                MkvStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases a sample handle. Null is accepted and ignored.
///
/// # Safety
///
/// `sample` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mkv_sample_free(sample: *mut MkvSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Writes the point count of `sample` to `out`.
///
/// # Safety
///
/// `sample` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn mkv_sample_len(sample: *const MkvSample, out: *mut usize) -> MkvStatus {
    if sample.is_null() {
        return null_arg("sample");
    }
    if out.is_null() {
        return null_arg("out");
    }
    out.write((*sample).0.len());
    MkvStatus::Ok
}

/// Writes the ambient dimension of `sample` to `out`.
///
/// # Safety
///
/// `sample` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn mkv_sample_dim(sample: *const MkvSample, out: *mut usize) -> MkvStatus {
    if sample.is_null() {
        return null_arg("sample");
    }
    if out.is_null() {
        return null_arg("out");
    }
    out.write((*sample).0.dim());
    MkvStatus::Ok
}

/// Gaussian kernel density estimate of `sample`, normalized to unit mass.
///
/// The bandwidth is Silverman's rule per axis. With `half_width > 0` the
/// grid is the cube `[-half_width, half_width]^d` with `nodes >= 2` nodes
/// per axis, and every sample point must sit at least three bandwidths
/// inside it. With `half_width <= 0` the grid is sized automatically from
/// the sample spread and `nodes` is ignored. Release the handle with
/// [`mkv_density_free`].
///
/// # Safety
///
/// `sample` must be a live handle; `out` must be valid for writing one
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn mkv_density_estimate(
    sample: *const MkvSample,
    half_width: f64,
    nodes: usize,
    out: *mut *mut MkvDensity,
) -> MkvStatus {
    if sample.is_null() {
        return null_arg("sample");
    }
    if out.is_null() {
        return null_arg("out");
    }
    let sample = &(*sample).0;
    guarded(|| {
        let built = silverman_bandwidth(sample).and_then(|bandwidth| {
            let grid = if half_width > 0.0 {
                Grid::centered_cube(sample.dim(), half_width, nodes)?
            } else {
                auto_grid(sample, &bandwidth, 1.0)?
            };
            kde_estimate(sample, &grid, &bandwidth)
        });
        match built {
            Ok(density) => {
                out.write(Box::into_raw(Box::new(MkvDensity(density))));
                MkvStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases a density handle. Null is accepted and ignored.
///
/// # Safety
///
/// `density` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mkv_density_free(density: *mut MkvDensity) {
    if !density.is_null() {
        drop(Box::from_raw(density));
    }
}

/// Writes the number of grid values held by `density` to `out`.
///
/// # Safety
///
/// `density` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn mkv_density_len(
    density: *const MkvDensity,
    out: *mut usize,
) -> MkvStatus {
    if density.is_null() {
        return null_arg("density");
    }
    if out.is_null() {
        return null_arg("out");
    }
    out.write((*density).0.values().len());
    MkvStatus::Ok
}

/// Writes the ambient dimension of `density` to `out`.
///
/// # Safety
///
/// `density` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn mkv_density_dim(
    density: *const MkvDensity,
    out: *mut usize,
) -> MkvStatus {
    if density.is_null() {
        return null_arg("density");
    }
    if out.is_null() {
        return null_arg("out");
    }
    out.write((*density).0.grid().dim());
    MkvStatus::Ok
}

/// Writes the total mass of `density` to `out` (1 up to roundoff).
///
/// # Safety
///
/// `density` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn mkv_density_mass(
    density: *const MkvDensity,
    out: *mut f64,
) -> MkvStatus {
    if density.is_null() {
        return null_arg("density");
    }
    if out.is_null() {
        return null_arg("out");
    }
    out.write((*density).0.mass());
    MkvStatus::Ok
}

/// Copies the grid values of `density` into `buf` in row-major node order.
///
/// Fails with `MKV_STATUS_BUFFER_TOO_SMALL` when `cap` is less than the
/// length reported by [`mkv_density_len`]; nothing is written in that case.
///
/// # Safety
///
/// `density` must be a live handle; `buf` must be valid for writing `cap`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn mkv_density_values(
    density: *const MkvDensity,
    buf: *mut f64,
    cap: usize,
) -> MkvStatus {
    if density.is_null() {
        return null_arg("density");
    }
    if buf.is_null() {
        return null_arg("buf");
    }
    let values = (*density).0.values();
    if cap < values.len() {
        set_error(format!(
            "buffer holds {cap} values but the density has {}",
            values.len()
        ));
        return MkvStatus::BufferTooSmall;
    }
    std::ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    MkvStatus::Ok
}

/// Writes the lattice k*-norm of `density` to `out`.
///
/// `k` must exceed 1; pass INFINITY for the supremum case. The covering
/// radius is the default sqrt(d) for the density's dimension.
///
/// # Safety
///
/// `density` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn mkv_kstar_norm(
    density: *const MkvDensity,
    k: f64,
    out: *mut f64,
) -> MkvStatus {
    if density.is_null() {
        return null_arg("density");
    }
    if out.is_null() {
        return null_arg("out");
    }
    let density = &(*density).0;
    guarded(|| match KStarParams::new(exponent_from(k), density.grid().dim()) {
        Ok(params) => {
            out.write(kstar_norm_surrogate(density, &params));
            MkvStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// Writes the lattice k*-distance between two densities to `out`.
///
/// Both densities must live on the same grid; `k` as in [`mkv_kstar_norm`].
///
/// # Safety
///
/// `a` and `b` must be live handles; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn mkv_kstar_distance(
    a: *const MkvDensity,
    b: *const MkvDensity,
    k: f64,
    out: *mut f64,
) -> MkvStatus {
    if a.is_null() {
        return null_arg("a");
    }
    if b.is_null() {
        return null_arg("b");
    }
    if out.is_null() {
        return null_arg("out");
    }
    let (a, b) = (&(*a).0, &(*b).0);
    guarded(|| {
        let run = KStarParams::new(exponent_from(k), a.grid().dim())
            .and_then(|params| kstar_distance(a, b, &params));
        match run {
            Ok(v) => {
                out.write(v);
                MkvStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Writes the total variation distance between two densities to `out`.
///
/// Both densities must live on the same grid; the value lies in [0, 2].
///
/// # Safety
///
/// `a` and `b` must be live handles; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn mkv_tv_distance(
    a: *const MkvDensity,
    b: *const MkvDensity,
    out: *mut f64,
) -> MkvStatus {
    if a.is_null() {
        return null_arg("a");
    }
    if b.is_null() {
        return null_arg("b");
    }
    if out.is_null() {
        return null_arg("out");
    }
    let (a, b) = (&(*a).0, &(*b).0);
    guarded(|| match tv_distance(a, b) {
        Ok(v) => {
            out.write(v);
            MkvStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// Writes the relative entropy of `a` with respect to `b` to `out`.
///
/// Both densities must live on the same grid. When `a` charges a region
/// where `b` vanishes the result is +INFINITY, not an error.
///
/// # Safety
///
/// `a` and `b` must be live handles; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn mkv_relative_entropy(
    a: *const MkvDensity,
    b: *const MkvDensity,
    out: *mut f64,
) -> MkvStatus {
    if a.is_null() {
        return null_arg("a");
    }
    if b.is_null() {
        return null_arg("b");
    }
    if out.is_null() {
        return null_arg("out");
    }
    let (a, b) = (&(*a).0, &(*b).0);
    guarded(|| match relative_entropy(a, b) {
        Ok(v) => {
            out.write(v.as_f64());
            MkvStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// Writes the order-`q` Wasserstein distance between two samples to `out`.
///
/// Both samples must have the same dimension and point count; `q >= 1`.
/// The coupling is exact (sorted in 1D, optimal assignment otherwise), so
/// cost grows steeply with the point count beyond a few thousand points.
///
/// # Safety
///
/// `a` and `b` must be live handles; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn mkv_wasserstein(
    a: *const MkvSample,
    b: *const MkvSample,
    q: f64,
    out: *mut f64,
) -> MkvStatus {
    if a.is_null() {
        return null_arg("a");
    }
    if b.is_null() {
        return null_arg("b");
    }
    if out.is_null() {
        return null_arg("out");
    }
    let (a, b) = (&(*a).0, &(*b).0);
    guarded(|| match wasserstein_q(a, b, q) {
        Ok(v) => {
            out.write(v);
            MkvStatus::Ok
        }
        Err(e) => fail(e),
    })
}
