use std::ffi::{c_char, CStr, CString};
use std::ptr;

use quadtrack::integrators::{IntegratorSpec, Method};
use quadtrack::sampling::InterpMode;
use quadtrack::scenarios::{analytic_field, bench_initial, BENCH_INITIAL};
use quadtrack::tracker::{track, Lattice, TrackOptions};
use quadtrack_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe {
        qt_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn reference_field(mode: &str) -> *mut QtField {
    let mut f = ptr::null_mut();
    let st = unsafe { qt_field_analytic(6e-4, 0.9, 0.9, 3.1, 4.0, 0.002, 2, c("af").as_ptr(), c(mode).as_ptr(), &mut f) };
    assert_eq!(st, QtStatus::Ok, "{}", last_error());
    f
}

#[test]
fn tracking_matches_the_library() {
    let f = reference_field("spline");
    let mut it = ptr::null_mut();
    assert_eq!(unsafe { qt_integrator_new(c("lie4").as_ptr(), 0.08, 0.0, 0, &mut it) }, QtStatus::Ok);
    let mut out = [0.0; 4];
    let mut lost = true;
    let st = unsafe { qt_track(f, it, 3, BENCH_INITIAL.as_ptr(), 0.0, out.as_mut_ptr(), &mut lost) };
    assert_eq!(st, QtStatus::Ok);
    assert!(!lost);

    let field = analytic_field(InterpMode::Spline).unwrap();
    let lattice = Lattice::fodo(&field, 3).unwrap();
    let r = track(&lattice, &bench_initial(), &TrackOptions::new(IntegratorSpec::new(Method::Lie4, 0.08))).unwrap();
    assert_eq!(out, r.last.coords());

    let mut counts = [0usize; 3];
    assert_eq!(unsafe { qt_field_counts(f, counts.as_mut_ptr()) }, QtStatus::Ok);
    assert_eq!(counts, field.term_counts());
    let mut a = [0.0; 3];
    assert_eq!(unsafe { qt_field_potential(f, 0.01, 0.02, 2.0, a.as_mut_ptr()) }, QtStatus::Ok);
    assert!(a[2] != 0.0);
    unsafe {
        qt_integrator_free(it);
        qt_field_free(f);
    }
}

#[test]
fn errors_are_reported() {
    let mut f = ptr::null_mut();
    let st = unsafe { qt_field_analytic(6e-4, 0.9, 0.9, 3.1, 4.0, 0.002, 2, c("lorenz").as_ptr(), c("spline").as_ptr(), &mut f) };
    assert_eq!(st, QtStatus::InvalidArgument);
    assert!(f.is_null());
    assert!(last_error().contains("lorenz"));

    let st = unsafe { qt_field_analytic(6e-4, 0.9, 0.9, 3.1, 4.0, 0.002, 2, ptr::null(), c("spline").as_ptr(), &mut f) };
    assert_eq!(st, QtStatus::NullPointer);
    assert!(last_error().contains("gauge"));

    let st = unsafe {
        qt_field_from_harmonics(
            c("/nonexistent/harmonics.csv").as_ptr(),
            0.05,
            0.0,
            2,
            1.0,
            c("hfc").as_ptr(),
            c("spline").as_ptr(),
            &mut f,
        )
    };
    assert_eq!(st, QtStatus::Io);
    assert!(last_error().contains("/nonexistent/harmonics.csv"));

    let mut it = ptr::null_mut();
    assert_eq!(unsafe { qt_integrator_new(c("rk4").as_ptr(), -1.0, 0.0, 0, &mut it) }, QtStatus::InvalidArgument);

    // a step that does not divide the magnet
    let field = reference_field("exact");
    assert_eq!(unsafe { qt_integrator_new(c("rk4").as_ptr(), 0.07, 0.0, 0, &mut it) }, QtStatus::Ok);
    let mut out = [0.0; 4];
    let st = unsafe { qt_track(field, it, 0, BENCH_INITIAL.as_ptr(), 0.0, out.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(st, QtStatus::InvalidArgument);
    unsafe {
        qt_integrator_free(it);
        qt_field_free(field);
        qt_field_free(ptr::null_mut());
    }
}

#[test]
fn error_buffer_truncates() {
    let mut f = ptr::null_mut();
    unsafe { qt_field_analytic(6e-4, 0.9, 0.9, 3.1, 4.0, 0.002, 2, c("x").as_ptr(), c("spline").as_ptr(), &mut f) };
    let mut buf = [1 as c_char; 4];
    let n = unsafe { qt_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 3);
    assert_eq!(buf[3], 0);
    assert_eq!(unsafe { qt_last_error_message(ptr::null_mut(), 0) }, n);
}

#[test]
fn header_declares_the_api() {
    let header = include_str!("../include/quadtrack.h");
    for name in ["qt_field_analytic", "qt_field_from_harmonics", "qt_track", "qt_last_error_message", "QT_STATUS_PANIC"] {
        assert!(header.contains(name), "{name}");
    }
    let v = unsafe { CStr::from_ptr(qt_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
