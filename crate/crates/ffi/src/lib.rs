//! C ABI over the mvlab pipeline: opaque handles, status codes, and plain
//! buffers, so any language with a C FFI can drive the laboratory.
//!
//! Conventions:
//! - Every fallible call returns an `MvStatus`; `MVLAB_STATUS_OK` is zero.
//! - On failure, `mvlab_last_error_message` retrieves a thread-local,
//!   NUL-terminated description of the most recent error.
//! - Handles (`MvModel`, `MvMeasure`) are created by `_new`/`_solve`
//!   functions and must be released with the matching `_free`; they are not
//!   thread-safe to mutate but are safe to read from many threads.
//! - All output buffers are caller-allocated; functions that fill arrays
//!   report the required length.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use mvlab::galerkin::{
    assemble_generator, assemble_perturbation, build_basis, spectral_panels, spectral_truncation,
    spectrum,
};
use mvlab::measure::{gibbs_measure, gibbs_measure_auto, GridMeasure};
use mvlab::model::{make_model, ModelKind, ModelSpec};
use mvlab::particle::{self, InitialLaw};
use mvlab::selfconsistency::{find_roots, RootClass};

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

/// Status codes returned by every fallible call.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MvStatus {
    Ok = 0,
    NullArgument = -1,
    UnknownModel = -2,
    InvalidParameter = -3,
    NumericalFailure = -4,
    NoSuchRoot = -5,
    BufferTooSmall = -6,
}

fn status_of(err: &mvlab::Error) -> MvStatus {
    use mvlab::Error::*;
    match err {
        UnknownModel(_) => MvStatus::UnknownModel,
        InvalidParameter { .. } | ConfigParse { .. } => MvStatus::InvalidParameter,
        _ => MvStatus::NumericalFailure,
    }
}

fn fail(err: mvlab::Error) -> MvStatus {
    let code = status_of(&err);
    set_error(&err.to_string());
    code
}

/// Opaque handle to a model instance.
pub struct MvModel(ModelSpec);

/// Opaque handle to a grid measure.
pub struct MvMeasure(GridMeasure);

/// One fixed-point root of the statistic equation.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MvRoot {
    pub m: f64,
    pub psi_prime: f64,
    /// -1 stable candidate, +1 unstable candidate, 0 marginal.
    pub classification: i32,
    pub residual: f64,
}

/// Spectral summary of the linearised generator.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MvSpectralReport {
    pub lambda_q: f64,
    pub lambda_p: f64,
    pub zero_residual: f64,
    /// 1 when the zero eigenvalue is simple, else 0.
    pub zero_simple: i32,
    pub basis_size: u32,
}

/// Fitted exponential decay of a distance trajectory.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MvRateFit {
    pub rate: f64,
    pub log_prefactor: f64,
    pub r_squared: f64,
    pub window_start: f64,
    pub window_end: f64,
    pub rate_stderr: f64,
    pub noise_floor: f64,
}

/// Copy the last error message into `buf` (NUL-terminated, truncating);
/// returns the full message length in bytes excluding the terminator.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be NULL (query mode).
#[no_mangle]
pub unsafe extern "C" fn mvlab_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            // Guarantee termination even when truncated.
            *buf.add(n - 1) = 0;
        }
        bytes.len() - 1
    })
}

/// Library version string (static, NUL-terminated).
#[no_mangle]
pub extern "C" fn mvlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Create a model. `name` is one of "dawson", "gausscos1d", "gausscos2d",
/// "subgaussian", "oubaseline".
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mvlab_model_new(
    name: *const c_char,
    beta: f64,
    sigma: f64,
    out: *mut *mut MvModel,
) -> MvStatus {
    if name.is_null() || out.is_null() {
        set_error("null argument");
        return MvStatus::NullArgument;
    }
    let Ok(name) = CStr::from_ptr(name).to_str() else {
        set_error("model name is not valid UTF-8");
        return MvStatus::UnknownModel;
    };
    let kind = match ModelKind::parse(name) {
        Ok(kind) => kind,
        Err(e) => return fail(e),
    };
    match make_model(kind, beta, sigma) {
        Ok(spec) => {
            *out = Box::into_raw(Box::new(MvModel(spec)));
            MvStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Release a model handle. NULL is ignored.
///
/// # Safety
/// `model` must have come from `mvlab_model_new` and not yet be freed.
#[no_mangle]
pub unsafe extern "C" fn mvlab_model_free(model: *mut MvModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Build the frozen-statistic stationary candidate measure at statistic
/// value `s`, with automatic truncation. `panels` of 0 picks the default.
///
/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mvlab_stationary_measure(
    model: *const MvModel,
    s: f64,
    panels: usize,
    out: *mut *mut MvMeasure,
) -> MvStatus {
    if model.is_null() || out.is_null() {
        set_error("null argument");
        return MvStatus::NullArgument;
    }
    let panels = if panels == 0 { 64 } else { panels };
    match gibbs_measure_auto(&(*model).0, s, panels) {
        Ok(mu) => {
            *out = Box::into_raw(Box::new(MvMeasure(mu)));
            MvStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Release a measure handle. NULL is ignored.
///
/// # Safety
/// `measure` must have come from this library and not yet be freed.
#[no_mangle]
pub unsafe extern "C" fn mvlab_measure_free(measure: *mut MvMeasure) {
    if !measure.is_null() {
        drop(Box::from_raw(measure));
    }
}

/// Mean of the measure.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mvlab_measure_mean(measure: *const MvMeasure, out: *mut f64) -> MvStatus {
    if measure.is_null() || out.is_null() {
        set_error("null argument");
        return MvStatus::NullArgument;
    }
    *out = (*measure).0.mean();
    MvStatus::Ok
}

/// Variance of the measure.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mvlab_measure_variance(
    measure: *const MvMeasure,
    out: *mut f64,
) -> MvStatus {
    if measure.is_null() || out.is_null() {
        set_error("null argument");
        return MvStatus::NullArgument;
    }
    *out = (*measure).0.variance();
    MvStatus::Ok
}

/// Quantile at level `p` in (0, 1).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mvlab_measure_quantile(
    measure: *const MvMeasure,
    p: f64,
    out: *mut f64,
) -> MvStatus {
    if measure.is_null() || out.is_null() {
        set_error("null argument");
        return MvStatus::NullArgument;
    }
    match (*measure).0.quantile(p) {
        Ok(q) => {
            *out = q;
            MvStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Fill `buf` with `len` reproducible i.i.d. draws for the given seed.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mvlab_measure_sample(
    measure: *const MvMeasure,
    len: usize,
    seed: u64,
    buf: *mut f64,
) -> MvStatus {
    if measure.is_null() || buf.is_null() {
        set_error("null argument");
        return MvStatus::NullArgument;
    }
    if len == 0 {
        return MvStatus::Ok;
    }
    let samples = (*measure).0.sample(len, seed);
    std::ptr::copy_nonoverlapping(samples.as_ptr(), buf, len);
    MvStatus::Ok
}

/// Find all fixed-point roots of the statistic equation on [lo, hi] with a
/// `grid`-point scan (0 picks 257). Writes at most `cap` roots into `roots`
/// and stores the total count in `out_len`; returns `BufferTooSmall` when
/// more roots exist than fit.
///
/// # Safety
/// `roots` must point to `cap` writable entries; `out_len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mvlab_find_roots(
    model: *const MvModel,
    lo: f64,
    hi: f64,
    grid: usize,
    roots: *mut MvRoot,
    cap: usize,
    out_len: *mut usize,
) -> MvStatus {
    if model.is_null() || roots.is_null() || out_len.is_null() {
        set_error("null argument");
        return MvStatus::NullArgument;
    }
    if hi.is_nan() || lo.is_nan() || hi <= lo {
        set_error("empty scan interval");
        return MvStatus::InvalidParameter;
    }
    let grid = if grid == 0 { 257 } else { grid.max(32) };
    let result = match find_roots(&(*model).0, (lo, hi), grid) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    *out_len = result.roots.len();
    for (i, root) in result.roots.iter().take(cap).enumerate() {
        *roots.add(i) = MvRoot {
            m: root.m,
            psi_prime: root.psi_prime,
            classification: match root.classification {
                RootClass::StableCandidate => -1,
                RootClass::UnstableCandidate => 1,
                RootClass::Marginal => 0,
            },
            residual: root.residual,
        };
    }
    if result.roots.len() > cap {
        set_error("root buffer too small");
        MvStatus::BufferTooSmall
    } else {
        MvStatus::Ok
    }
}

/// Spectrum of the linearised generator at the fixed point `s` with a
/// basis of `basis_size` functions (0 picks 40). Fills the report, and up
/// to `cap` eigenvalues (descending real part) into `eig_re`/`eig_im`;
/// `out_len` receives the number written.
///
/// # Safety
/// Buffers must match `cap`; all out-pointers must be valid (eigenvalue
/// buffers may be NULL with cap 0 to fetch the report alone).
#[no_mangle]
pub unsafe extern "C" fn mvlab_spectrum(
    model: *const MvModel,
    s: f64,
    basis_size: usize,
    report: *mut MvSpectralReport,
    eig_re: *mut f64,
    eig_im: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> MvStatus {
    if model.is_null() || report.is_null() || out_len.is_null() {
        set_error("null argument");
        return MvStatus::NullArgument;
    }
    let spec = &(*model).0;
    if spec.dim != 1 {
        set_error("spectrum over this ABI supports one-dimensional models");
        return MvStatus::InvalidParameter;
    }
    let size = if basis_size == 0 { 40 } else { basis_size };
    let run = || -> mvlab::Result<mvlab::galerkin::SpectralReport> {
        let r = spectral_truncation(spec, size);
        let mu = gibbs_measure(spec, s, r, spectral_panels(spec, r, size))?;
        let basis = build_basis(mu, size)?;
        let l = assemble_generator(&basis, spec, s)?;
        let a = assemble_perturbation(&basis, spec, s)?;
        spectrum(&l, &a)
    };
    let rep = match run() {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    *report = MvSpectralReport {
        lambda_q: rep.lambda_q,
        lambda_p: rep.lambda_p,
        zero_residual: rep.zero_residual,
        zero_simple: rep.zero_simple as i32,
        basis_size: rep.basis_size as u32,
    };
    let n = rep.eigenvalues.len().min(cap);
    if n > 0 && (eig_re.is_null() || eig_im.is_null()) {
        set_error("null eigenvalue buffer with nonzero capacity");
        return MvStatus::NullArgument;
    }
    for (i, &(re, im)) in rep.eigenvalues.iter().take(n).enumerate() {
        *eig_re.add(i) = re;
        *eig_im.add(i) = im;
    }
    *out_len = n;
    MvStatus::Ok
}

/// Simulate the interacting ensemble from the stationary candidate at root
/// value `s` shifted by `shift`, and fit the exponential decay rate of the
/// Wasserstein distance back to it.
///
/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mvlab_rate_fit(
    model: *const MvModel,
    s: f64,
    shift: f64,
    n_particles: usize,
    dt: f64,
    t_final: f64,
    seed: u64,
    out: *mut MvRateFit,
) -> MvStatus {
    if model.is_null() || out.is_null() {
        set_error("null argument");
        return MvStatus::NullArgument;
    }
    let spec = &(*model).0;
    let run = || -> mvlab::Result<(mvlab::semigroup::RateFit, f64)> {
        let target = gibbs_measure_auto(spec, s, 64)?;
        let (fit, record) = particle::run_and_fit(
            spec,
            InitialLaw::DrawShifted(&target, shift),
            &target,
            n_particles,
            dt,
            t_final,
            seed,
        )?;
        Ok((fit, record.noise_floor))
    };
    match run() {
        Ok((fit, floor)) => {
            *out = MvRateFit {
                rate: fit.rate,
                log_prefactor: fit.log_prefactor,
                r_squared: fit.r_squared,
                window_start: fit.window.0,
                window_end: fit.window.1,
                rate_stderr: fit.rate_stderr,
                noise_floor: floor,
            };
            MvStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Stochastic-integral gradient estimate of the frozen semigroup for the
/// identity observable: d/dx E[Y_t | Y_0 = x] in direction `v`.
///
/// # Safety
/// `model`, `out_estimate`, and `out_stderr` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mvlab_gradient_estimate(
    model: *const MvModel,
    s_frozen: f64,
    x0: f64,
    v: f64,
    t: f64,
    paths: usize,
    dt: f64,
    seed: u64,
    out_estimate: *mut f64,
    out_stderr: *mut f64,
) -> MvStatus {
    if model.is_null() || out_estimate.is_null() || out_stderr.is_null() {
        set_error("null argument");
        return MvStatus::NullArgument;
    }
    match particle::bismut_gradient(&(*model).0, s_frozen, |x| x, x0, v, t, paths, dt, seed) {
        Ok(est) => {
            *out_estimate = est.estimate;
            *out_stderr = est.stderr;
            MvStatus::Ok
        }
        Err(e) => fail(e),
    }
}
