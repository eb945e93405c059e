use std::ffi::{CStr, CString};
use std::ptr;

use helical_lab_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { hl_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn moment3() -> *mut HlCurve {
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { hl_curve_moment(3, &mut c) }, HlStatus::Ok);
    c
}

#[test]
fn frenet_frame_is_orthonormal() {
    let c = moment3();
    let mut basis = [0.0; 9];
    let mut kappa = [0.0; 2];
    let st = unsafe { hl_curve_frenet(c, 0.0, basis.as_mut_ptr(), 9, kappa.as_mut_ptr(), 2) };
    assert_eq!(st, HlStatus::Ok);
    for i in 0..3 {
        for j in 0..3 {
            let dot: f64 = (0..3).map(|a| basis[3 * i + a] * basis[3 * j + a]).sum();
            assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }
    let mut det = 0.0;
    assert_eq!(unsafe { hl_curve_det(c, 0.4, &mut det) }, HlStatus::Ok);
    assert!((det - 1.0).abs() < 1e-12);
    assert_eq!(unsafe { hl_curve_dim(c) }, 3);
    unsafe { hl_curve_free(c) };
}

#[test]
fn roots_match_closed_form() {
    let c = moment3();
    let xi = [-0.02, 0.01, 1.0];
    let mut r = HlRoots { theta2: 0.0, u: 0.0, theta1_minus: 0.0, theta1_plus: 0.0, root_count: 9 };
    assert_eq!(unsafe { hl_roots(c, xi.as_ptr(), &mut r) }, HlStatus::Ok);
    let theta2 = -xi[1] / xi[2];
    let u = xi[0] - xi[1] * xi[1] / (2.0 * xi[2]);
    let d = (-2.0 * u / xi[2]).sqrt();
    assert!((r.theta2 - theta2).abs() < 1e-12 && (r.u - u).abs() < 1e-12);
    assert!((r.theta1_plus - (theta2 + d)).abs() < 1e-10);
    assert_eq!(r.root_count, 2);
    // u > 0: no θ₁ roots, reported as NaN
    let xi = [0.02, 0.0, 1.0];
    assert_eq!(unsafe { hl_roots(c, xi.as_ptr(), &mut r) }, HlStatus::Ok);
    assert_eq!(r.root_count, 0);
    assert!(r.theta1_minus.is_nan());
    unsafe { hl_curve_free(c) };
}

#[test]
fn decay_slope_and_multiplier() {
    let c = moment3();
    let dir = [0.0, 0.0, 1.0];
    let mut fit = HlFit { slope: 0.0, intercept: 0.0, residual: 0.0, n_points: 0 };
    assert_eq!(unsafe { hl_decay_fit(c, dir.as_ptr(), 1.0, 6, 14, &mut fit) }, HlStatus::Ok);
    assert_eq!(fit.n_points, 9);
    assert!((-0.38..=-0.28).contains(&fit.slope), "{}", fit.slope);
    let (mut re, mut im) = (0.0, 0.0);
    let zero = [0.0; 3];
    assert_eq!(unsafe { hl_multiplier(c, zero.as_ptr(), 3, 1.0, &mut re, &mut im) }, HlStatus::Ok);
    assert!(re > 0.0 && im.abs() < 1e-12);
    unsafe { hl_curve_free(c) };
}

#[test]
fn errors_are_codes_with_messages() {
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { hl_curve_moment(1, &mut c) }, HlStatus::InvalidArgument);
    assert!(c.is_null());
    assert!(last_error().contains("dimension"));
    assert_eq!(unsafe { hl_curve_moment(3, ptr::null_mut()) }, HlStatus::NullPointer);
    let mut det = 0.0;
    assert_eq!(unsafe { hl_curve_det(ptr::null(), 0.0, &mut det) }, HlStatus::NullPointer);

    let c = moment3();
    let mut small = [0.0; 2];
    assert_eq!(unsafe { hl_curve_derivative(c, 1, 0.0, small.as_mut_ptr(), 2) }, HlStatus::BufferTooSmall);
    let (mut re, mut im) = (0.0, 0.0);
    let xi = [0.0, 0.0, 1.0];
    assert_eq!(unsafe { hl_multiplier(c, xi.as_ptr(), 3, 9.0, &mut re, &mut im) }, HlStatus::InvalidArgument);
    assert!(last_error().contains("t = 9"));
    // a straight line is degenerate
    let coeffs = [0.0, 1.0, 0.0, 2.0, 0.0, 3.0];
    let mut line = ptr::null_mut();
    let st = unsafe { hl_curve_polynomial(coeffs.as_ptr(), 3, 2, &mut line) };
    if st == HlStatus::Ok {
        let mut basis = [0.0; 9];
        assert_eq!(unsafe { hl_curve_frenet(line, 0.0, basis.as_mut_ptr(), 9, ptr::null_mut(), 0) }, HlStatus::DegenerateCurve);
        unsafe { hl_curve_free(line) };
    }
    unsafe { hl_curve_free(c) };
    unsafe { hl_curve_free(ptr::null_mut()) };
}

#[test]
fn config_run_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, r#"{"experiment": "frenet"}"#).unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let out = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { hl_config_load(cpath.as_ptr(), &mut cfg) }, HlStatus::Ok);
    assert_eq!(unsafe { hl_config_override(cfg, 5, out.as_ptr()) }, HlStatus::Ok);
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { hl_run(cfg, 1, &mut run) }, HlStatus::Ok);
    assert_eq!(unsafe { hl_run_passed(run) }, 1);
    assert_eq!(unsafe { hl_run_count(run, 0) }, 3);
    assert_eq!(unsafe { hl_run_count(run, 1) }, 0);
    assert!(dir.path().join("out/frenet/summary.json").exists());
    unsafe {
        hl_run_free(run);
        hl_config_free(cfg);
    }

    std::fs::write(&path, r#"{"experimentt": "frenet"}"#).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { hl_config_load(cpath.as_ptr(), &mut cfg) }, HlStatus::ConfigInvalid);
    assert!(last_error().contains("did you mean"));
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(hl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
