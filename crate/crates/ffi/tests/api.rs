use std::ffi::{CStr, CString};
use std::ptr;

use freesub_ffi::*;

fn parse(spec: &str) -> *mut FsMeasure {
    let s = CString::new(spec).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { fs_measure_parse(s.as_ptr(), &mut m) }, FsStatus::Ok, "{spec}");
    m
}

fn last_error() -> String {
    let p = fs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn measure_round_trip() {
    let m = parse("pareto:1.5,1");
    let mut v = 0.0;
    unsafe {
        assert_eq!(fs_measure_tail(m, 4.0, &mut v), FsStatus::Ok);
        assert!((v - 0.125).abs() < 1e-15);
        assert_eq!(fs_measure_moment(m, 1, &mut v), FsStatus::Ok);
        assert!((v - 3.0).abs() < 1e-12);
        assert_eq!(fs_measure_moment(m, 2, &mut v), FsStatus::Ok);
        assert!(v.is_infinite());
        assert_eq!(fs_measure_tail_index(m, &mut v), FsStatus::Ok);
        assert_eq!(v, 1.5);
        let mut need = 0;
        assert_eq!(fs_measure_label(m, ptr::null_mut(), 0, &mut need), FsStatus::BufferTooSmall);
        let mut buf = vec![0i8; need];
        assert_eq!(fs_measure_label(m, buf.as_mut_ptr().cast(), need, &mut need), FsStatus::Ok);
        assert!(CStr::from_ptr(buf.as_ptr().cast()).to_str().unwrap().starts_with("pareto"));
        fs_measure_free(m);
    }
    let j = parse(r#"{"kind":"semicircle","center":2.0,"radius":2.0}"#);
    unsafe {
        assert_eq!(fs_measure_density(j, 2.0, &mut v), FsStatus::Ok);
        assert!((v - 1.0 / std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(fs_measure_tail_index(j, &mut v), FsStatus::Ok);
        assert!(v.is_nan());
        fs_measure_free(j);
    }
}

#[test]
fn error_codes() {
    let mut m = ptr::null_mut();
    let bad = CString::new("pareto:-1").unwrap();
    assert_eq!(unsafe { fs_measure_parse(bad.as_ptr(), &mut m) }, FsStatus::InvalidMeasure);
    assert!(m.is_null());
    assert!(!last_error().is_empty());
    let json = CString::new(r#"{"kind":"cauchy"}"#).unwrap();
    assert_eq!(unsafe { fs_measure_parse(json.as_ptr(), &mut m) }, FsStatus::InvalidMeasure);
    assert_eq!(unsafe { fs_measure_parse(ptr::null(), &mut m) }, FsStatus::NullPointer);
    let mut v = 0.0;
    assert_eq!(unsafe { fs_measure_tail(ptr::null(), 1.0, &mut v) }, FsStatus::NullPointer);
    let s = parse("semicircle:2,2");
    let (mut re, mut im) = (0.0, 0.0);
    assert_eq!(unsafe { fs_cauchy(s, 1.0, -1.0, &mut re, &mut im) }, FsStatus::OutsideDomain);
    assert!(last_error().contains("domain"));
    // a successful call clears the message
    assert_eq!(unsafe { fs_cauchy(s, 1.0, 1.0, &mut re, &mut im) }, FsStatus::Ok);
    assert!(fs_last_error().is_null());
    let spec = FsGridSpec { nodes: 3, ..fs_grid_spec_default() };
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { fs_convolve(s, s, &spec, &mut r) }, FsStatus::InvalidArgument);
    assert!(r.is_null());
    unsafe {
        fs_measure_free(s);
        fs_measure_free(ptr::null_mut());
        fs_convolution_free(ptr::null_mut());
    }
}

#[test]
fn cauchy_matches_closed_form() {
    let m = parse("point:1.5");
    let (mut re, mut im) = (0.0, 0.0);
    assert_eq!(unsafe { fs_cauchy(m, 0.5, 2.0, &mut re, &mut im) }, FsStatus::Ok);
    let want = 1.0 / freesub::C64::new(-1.0, 2.0);
    assert!((re - want.re).abs() < 1e-14 && (im - want.im).abs() < 1e-14);
    // phi of a point mass is the constant a
    assert_eq!(unsafe { fs_voiculescu(m, 0.0, 50.0, &mut re, &mut im) }, FsStatus::Ok);
    assert!((re - 1.5).abs() < 1e-9 && im.abs() < 1e-9, "{re} {im}");
    unsafe { fs_measure_free(m) };
}

#[test]
fn convolution_grid() {
    let s = parse("semicircle:2,2");
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { fs_convolve(s, s, ptr::null(), &mut r) }, FsStatus::Ok);
    let mut n = 0;
    assert_eq!(unsafe { fs_convolution_len(r, &mut n) }, FsStatus::Ok);
    assert!(n > 100);
    let (mut x, mut f) = (vec![0.0; n], vec![0.0; n]);
    assert_eq!(unsafe { fs_convolution_grid(r, x.as_mut_ptr(), f.as_mut_ptr(), n - 1) }, FsStatus::BufferTooSmall);
    assert_eq!(unsafe { fs_convolution_grid(r, x.as_mut_ptr(), f.as_mut_ptr(), n) }, FsStatus::Ok);
    let exact = freesub::measures::Measure::semicircle(4.0, 2.0 * std::f64::consts::SQRT_2).unwrap();
    let sup = x.iter().zip(&f).map(|(x, f)| (f - exact.density(*x)).abs()).fold(0.0, f64::max);
    assert!(sup < 5e-3, "{sup}");
    let (mut md, mut res) = (0.0, 0.0);
    assert_eq!(unsafe { fs_convolution_diagnostics(r, &mut md, &mut res) }, FsStatus::Ok);
    assert!(md < 1e-4 && res < 1e-6);
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { fs_convolution_measure(r, &mut m) }, FsStatus::Ok);
    let mut v = 0.0;
    assert_eq!(unsafe { fs_measure_moment(m, 1, &mut v) }, FsStatus::Ok);
    assert!((v - 4.0).abs() < 4e-3, "{v}");
    unsafe {
        fs_measure_free(m);
        fs_convolution_free(r);
    }
    let p = parse("point:1");
    assert_eq!(unsafe { fs_free_power(p, 3, ptr::null(), &mut r) }, FsStatus::Ok);
    assert_eq!(unsafe { fs_convolution_len(r, &mut n) }, FsStatus::Ok);
    assert_eq!(n, 0);
    unsafe {
        fs_convolution_free(r);
        fs_measure_free(p);
        fs_measure_free(s);
    }
}
