//! C ABI over the laboratory.
//!
//! Curves, configs and run results cross the boundary as opaque handles
//! that the caller releases with the matching `*_free`. Every fallible
//! call returns an [`HlStatus`]; the message of the last failure on the
//! calling thread is available through [`hl_last_error_message`]. Panics
//! never unwind into C: they are caught and reported as `HL_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use helical_lab::config::ExperimentConfig;
use helical_lab::curve::{frenet_frame, Curve};
use helical_lab::oscillatory::{dyadic_range, evaluate_multiplier, fit_decay, MultiplierSetup};
use helical_lab::report::{run, RunSummary, Verdict};
use helical_lab::roots::{compute_roots, FrequencyPoint};
use helical_lab::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DegenerateCurve = 3,
    OutOfRegion = 4,
    NoConvergence = 5,
    ConfigInvalid = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
    Other = 10,
}

/// A curve `γ: [a,b] → ℝⁿ`.
pub struct HlCurve(Curve);

/// A validated experiment configuration.
pub struct HlConfig(ExperimentConfig);

/// The summaries of one run.
pub struct HlRun(Vec<RunSummary>);

/// Critical-point data of the phase at a frequency. Missing roots are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HlRoots {
    pub theta2: f64,
    pub u: f64,
    pub theta1_minus: f64,
    pub theta1_plus: f64,
    pub root_count: u32,
}

/// A log-log fit.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HlFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub n_points: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> HlStatus {
    match e {
        Error::DegenerateCurve { .. } => HlStatus::DegenerateCurve,
        Error::OutOfRegion(_) => HlStatus::OutOfRegion,
        Error::NoConvergence { .. } | Error::QuadratureNotConverged { .. } | Error::RefinementNotConverged { .. } => {
            HlStatus::NoConvergence
        }
        Error::InvalidArgument(_) | Error::UnsupportedFamily(_) | Error::EmptySample => HlStatus::InvalidArgument,
        Error::ConfigInvalid(_) => HlStatus::ConfigInvalid,
        Error::Io(_) | Error::FileUnreadable { .. } | Error::Csv(_) | Error::Json(_) => HlStatus::Io,
        _ => HlStatus::Other,
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), HlStatus>) -> HlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HlStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside the library");
            HlStatus::Panic
        }
    }
}

fn fail(e: Error) -> HlStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn invalid(msg: &str) -> HlStatus {
    set_error(msg);
    HlStatus::InvalidArgument
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, HlStatus> {
    if p.is_null() {
        set_error("null pointer argument");
        Err(HlStatus::NullPointer)
    } else {
        Ok(&*p)
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], HlStatus> {
    if p.is_null() {
        set_error("null pointer argument");
        Err(HlStatus::NullPointer)
    } else {
        Ok(std::slice::from_raw_parts(p, len))
    }
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize) -> Result<&'a mut [f64], HlStatus> {
    if p.is_null() {
        set_error("null pointer argument");
        Err(HlStatus::NullPointer)
    } else {
        Ok(std::slice::from_raw_parts_mut(p, len))
    }
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), HlStatus> {
    if out.is_null() {
        set_error("null output pointer");
        return Err(HlStatus::NullPointer);
    }
    out.write(value);
    Ok(())
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, HlStatus> {
    if p.is_null() {
        set_error("null path");
        return Err(HlStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map(PathBuf::from).map_err(|_| invalid("path is not UTF-8"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length, 0 if none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn hl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// The moment curve `(s, s²/2, …, sⁿ/n!)`.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn hl_curve_moment(n: usize, out: *mut *mut HlCurve) -> HlStatus {
    guard(|| {
        if !(2..=8).contains(&n) {
            return Err(invalid("moment curve dimension must lie in [2, 8]"));
        }
        put(out, Box::into_raw(Box::new(HlCurve(Curve::moment(n)))))
    })
}

/// The helix `(r cos s, r sin s, h s)`.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn hl_curve_helix(radius: f64, pitch: f64, out: *mut *mut HlCurve) -> HlStatus {
    guard(|| {
        if radius.is_nan() || radius <= 0.0 || pitch == 0.0 || !radius.is_finite() || !pitch.is_finite() {
            return Err(invalid("helix needs a positive radius and a nonzero pitch"));
        }
        put(out, Box::into_raw(Box::new(HlCurve(Curve::helix(radius, pitch)))))
    })
}

/// A polynomial curve: `coefficients` is row-major `dim × terms`, entry
/// `(i, m)` being the coefficient of `s^m` in component `i`.
///
/// # Safety
/// `coefficients` must point to `dim * terms` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hl_curve_polynomial(
    coefficients: *const f64,
    dim: usize,
    terms: usize,
    out: *mut *mut HlCurve,
) -> HlStatus {
    guard(|| {
        let c = slice(coefficients, dim * terms)?;
        let rows: Vec<Vec<f64>> = c.chunks(terms.max(1)).map(<[f64]>::to_vec).collect();
        let curve = Curve::polynomial(rows).map_err(fail)?;
        put(out, Box::into_raw(Box::new(HlCurve(curve))))
    })
}

/// Releases a curve handle. Null is a no-op.
///
/// # Safety
/// `curve` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hl_curve_free(curve: *mut HlCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// Ambient dimension of the curve, 0 for a null handle.
///
/// # Safety
/// `curve` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hl_curve_dim(curve: *const HlCurve) -> usize {
    curve.as_ref().map_or(0, |c| c.0.dim())
}

/// Writes the `order`-th derivative `γ^{(order)}(s)` into `out[0..len]`;
/// `len` must equal the dimension.
///
/// # Safety
/// `curve` must be a live handle and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hl_curve_derivative(
    curve: *const HlCurve,
    order: usize,
    s: f64,
    out: *mut f64,
    len: usize,
) -> HlStatus {
    guard(|| {
        let c = &deref(curve)?.0;
        if len != c.dim() {
            set_error(format!("output holds {len} values, curve dimension is {}", c.dim()));
            return Err(HlStatus::BufferTooSmall);
        }
        slice_mut(out, len)?.copy_from_slice(c.derivative(order, s).as_slice());
        Ok(())
    })
}

/// `det[γ'(s) … γ^{(n)}(s)]`.
///
/// # Safety
/// `curve` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hl_curve_det(curve: *const HlCurve, s: f64, out: *mut f64) -> HlStatus {
    guard(|| put(out, deref(curve)?.0.det(s)))
}

/// Frenet frame at `s`: `basis` receives the `n × n` frame row by row
/// (row `j` is `e_{j+1}`), `curvatures` the `n − 1` curvatures.
///
/// # Safety
/// `basis` must hold `n*n` doubles and `curvatures` `n-1` doubles (or be null).
#[no_mangle]
pub unsafe extern "C" fn hl_curve_frenet(
    curve: *const HlCurve,
    s: f64,
    basis: *mut f64,
    basis_len: usize,
    curvatures: *mut f64,
    curvatures_len: usize,
) -> HlStatus {
    guard(|| {
        let c = &deref(curve)?.0;
        let n = c.dim();
        if basis_len != n * n || (!curvatures.is_null() && curvatures_len != n - 1) {
            set_error(format!("need {} basis and {} curvature slots", n * n, n - 1));
            return Err(HlStatus::BufferTooSmall);
        }
        let frame = frenet_frame(c, s).map_err(fail)?;
        let b = slice_mut(basis, basis_len)?;
        for (j, e) in frame.basis.iter().enumerate() {
            b[j * n..(j + 1) * n].copy_from_slice(e.as_slice());
        }
        if !curvatures.is_null() {
            slice_mut(curvatures, curvatures_len)?.copy_from_slice(&frame.curvatures);
        }
        Ok(())
    })
}

/// Critical points of `s ↦ ⟨γ(s), ξ⟩` near the origin, for `ξ ∈ ℝ³`.
///
/// # Safety
/// `xi` must point to 3 doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hl_roots(curve: *const HlCurve, xi: *const f64, out: *mut HlRoots) -> HlStatus {
    guard(|| {
        let c = &deref(curve)?.0;
        let x = slice(xi, 3)?;
        let point = FrequencyPoint::new(x.to_vec()).map_err(fail)?;
        let r = compute_roots(c, &point).map_err(fail)?;
        put(
            out,
            HlRoots {
                theta2: r.theta2,
                u: r.u,
                theta1_minus: r.theta1_minus.unwrap_or(f64::NAN),
                theta1_plus: r.theta1_plus.unwrap_or(f64::NAN),
                root_count: r.root_count() as u32,
            },
        )
    })
}

/// The averaging multiplier `m(ξ, t)` with the wide cutoff; `xi` has the
/// curve's dimension.
///
/// # Safety
/// `xi` must point to `len` doubles; `re` and `im` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hl_multiplier(
    curve: *const HlCurve,
    xi: *const f64,
    len: usize,
    t: f64,
    re: *mut f64,
    im: *mut f64,
) -> HlStatus {
    guard(|| {
        let c = &deref(curve)?.0;
        let x = slice(xi, len)?;
        let m = evaluate_multiplier(c, None, x, t, &MultiplierSetup::wide()).map_err(fail)?;
        put(re, m.value.re)?;
        put(im, m.value.im)
    })
}

/// Log-log fit of `|m(R·direction, t)|` over `R = 2^lo … 2^hi`.
///
/// # Safety
/// `direction` must point to the curve's dimension of doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hl_decay_fit(
    curve: *const HlCurve,
    direction: *const f64,
    t: f64,
    log2_lo: i32,
    log2_hi: i32,
    out: *mut HlFit,
) -> HlStatus {
    guard(|| {
        let c = &deref(curve)?.0;
        let d = slice(direction, c.dim())?;
        if log2_hi <= log2_lo {
            return Err(invalid("need log2_lo < log2_hi"));
        }
        let res = fit_decay(c, d, t, &dyadic_range(log2_lo, log2_hi), None, &MultiplierSetup::wide()).map_err(fail)?;
        let f = res.fit;
        put(out, HlFit { slope: f.slope, intercept: f.intercept, residual: f.residual, n_points: f.n_points })
    })
}

/// Loads and validates a config file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hl_config_load(path: *const c_char, out: *mut *mut HlConfig) -> HlStatus {
    guard(|| {
        let p = path_arg(path)?;
        let cfg = ExperimentConfig::load(&p).map_err(fail)?;
        put(out, Box::into_raw(Box::new(HlConfig(cfg))))
    })
}

/// Overrides the seed and, if `output` is non-null, the output directory.
///
/// # Safety
/// `config` must be a live handle; `output` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hl_config_override(config: *mut HlConfig, seed: u64, output: *const c_char) -> HlStatus {
    guard(|| {
        if config.is_null() {
            set_error("null config");
            return Err(HlStatus::NullPointer);
        }
        let cfg = &mut (*config).0;
        cfg.seed = seed;
        if !output.is_null() {
            cfg.output = path_arg(output)?;
        }
        Ok(())
    })
}

/// Releases a config handle. Null is a no-op.
///
/// # Safety
/// `config` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hl_config_free(config: *mut HlConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the configured experiments, writing artifacts to the config's
/// output directory. A run whose checks fail still succeeds here; query
/// the verdict with [`hl_run_passed`].
///
/// # Safety
/// `config` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hl_run(config: *const HlConfig, threads: usize, out: *mut *mut HlRun) -> HlStatus {
    guard(|| {
        let cfg = &deref(config)?.0;
        let summaries = run(cfg, threads > 1, threads.max(1)).map_err(fail)?;
        put(out, Box::into_raw(Box::new(HlRun(summaries))))
    })
}

/// 1 if no check of the run failed, 0 otherwise or for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hl_run_passed(run: *const HlRun) -> i32 {
    run.as_ref().map_or(0, |r| r.0.iter().all(RunSummary::pass) as i32)
}

/// Number of checks in the run with the given verdict (0 pass, 1 fail, 2 skipped).
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hl_run_count(run: *const HlRun, verdict: u32) -> usize {
    let want = match verdict {
        0 => Verdict::Pass,
        1 => Verdict::Fail,
        2 => Verdict::Skipped,
        _ => return 0,
    };
    run.as_ref().map_or(0, |r| r.0.iter().flat_map(|s| &s.checks).filter(|c| c.verdict == want).count())
}

/// Releases a run handle. Null is a no-op.
///
/// # Safety
/// `run` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hl_run_free(run: *mut HlRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
