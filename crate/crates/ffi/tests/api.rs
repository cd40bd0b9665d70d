use std::ffi::{CStr, CString};
use std::ptr;

use csa_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(csa_last_error()) }.to_string_lossy().into_owned()
}

fn parse(text: &str) -> *mut CsaDistribution {
    let c = CString::new(text).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { csa_distribution_parse(c.as_ptr(), &mut out) }, CsaStatus::Ok);
    out
}

#[test]
fn distribution_queries() {
    let d = parse("2:0.5,3:0.28,8:0.22");
    let (mut mean, mut rate) = (0.0, 0.0);
    unsafe {
        assert_eq!(csa_distribution_mean_degree(d, &mut mean), CsaStatus::Ok);
        assert_eq!(csa_distribution_rate(d, &mut rate), CsaStatus::Ok);
        csa_distribution_free(d);
    }
    assert!((mean - 3.6).abs() < 1e-12);
    assert!((rate - 1.0 / 3.6).abs() < 1e-12);
}

#[test]
fn parse_errors_set_message() {
    let bad = CString::new("2:0.5,3:0.4").unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { csa_distribution_parse(bad.as_ptr(), &mut out) };
    assert_eq!(status, CsaStatus::InvalidArgument);
    assert!(out.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { csa_distribution_parse(ptr::null(), &mut out) }, CsaStatus::NullPointer);
    let invalid_utf8 = [0xffu8, 0];
    assert_eq!(
        unsafe { csa_distribution_parse(invalid_utf8.as_ptr().cast(), &mut out) },
        CsaStatus::Utf8
    );

    let d = parse("2:1");
    let mut x = 0.0;
    assert_eq!(unsafe { csa_distribution_rate(d, &mut x) }, CsaStatus::Ok);
    assert_eq!(last_error(), "");
    assert_eq!(unsafe { csa_distribution_rate(d, ptr::null_mut()) }, CsaStatus::NullPointer);
    unsafe { csa_distribution_free(d) };
}

#[test]
fn threshold_and_bound() {
    let d = parse("3:1");
    let mut g = 0.0;
    unsafe {
        assert_eq!(csa_threshold(d, 1e-6, &mut g), CsaStatus::Ok);
        assert!((g - 0.8184).abs() < 1e-3);
        assert_eq!(csa_threshold(d, 0.0, &mut g), CsaStatus::InvalidArgument);
        csa_distribution_free(d);
        assert_eq!(csa_bound_root(0.5, &mut g), CsaStatus::Ok);
        assert!((g - 0.7968).abs() < 1e-4);
        assert_eq!(csa_bound_root(1.5, &mut g), CsaStatus::InvalidArgument);
    }
}

#[test]
fn three_user_fixture_over_the_boundary() {
    // User 0: slot 2; user 1: slots 0,3; user 2: slots 0,2.
    let offsets = [0usize, 1, 3, 5];
    let slots = [2usize, 0, 3, 0, 2];
    let mut g = ptr::null_mut();
    let mut t = ptr::null_mut();
    let mut t0 = ptr::null_mut();
    let (mut users, mut nslots, mut resolved, mut iters) = (0, 0, 0, 0);
    unsafe {
        assert_eq!(csa_graph_new(4, 3, offsets.as_ptr(), slots.as_ptr(), &mut g), CsaStatus::Ok);
        assert_eq!(csa_graph_size(g, &mut users, &mut nslots), CsaStatus::Ok);
        assert_eq!((users, nslots), (3, 4));
        assert_eq!(csa_peel(g, &mut t), CsaStatus::Ok);
        assert_eq!(csa_trace_summary(t, &mut resolved, &mut iters), CsaStatus::Ok);
        assert_eq!((resolved, iters), (3, 3));
        assert_eq!(csa_decode_without_sic(g, &mut t0), CsaStatus::Ok);
        assert_eq!(csa_trace_summary(t0, &mut resolved, ptr::null_mut()), CsaStatus::Ok);
        assert_eq!(resolved, 1);
        let mut slot = 0i64;
        assert_eq!(csa_trace_recovery_slot(t0, 0, &mut slot), CsaStatus::Ok);
        assert_eq!(slot, -1);
        assert_eq!(csa_trace_recovery_slot(t0, 1, &mut slot), CsaStatus::Ok);
        assert_eq!(slot, 3);
        assert_eq!(csa_trace_recovery_slot(t0, 3, &mut slot), CsaStatus::InvalidArgument);
        csa_trace_free(t);
        csa_trace_free(t0);
        csa_graph_free(g);
    }
}

#[test]
fn graph_validation() {
    let mut g = ptr::null_mut();
    unsafe {
        // Slot out of range.
        let (offsets, slots) = ([0usize, 1], [7usize]);
        assert_eq!(csa_graph_new(4, 1, offsets.as_ptr(), slots.as_ptr(), &mut g), CsaStatus::InvalidArgument);
        let decreasing = [0usize, 2, 1];
        assert_eq!(
            csa_graph_new(4, 2, decreasing.as_ptr(), slots.as_ptr(), &mut g),
            CsaStatus::InvalidArgument
        );
        assert_eq!(csa_graph_new(4, 0, ptr::null(), ptr::null(), &mut g), CsaStatus::NullPointer);
        let empty = [0usize];
        assert_eq!(csa_graph_new(4, 0, empty.as_ptr(), ptr::null(), &mut g), CsaStatus::Ok);
        csa_graph_free(g);
        csa_graph_free(ptr::null_mut());
    }
}

#[test]
fn random_graph_and_sweep_match_core() {
    let d = parse("2:1");
    let loads = [0.3, 0.6];
    let mut rows = [CsaSweepRow::default(); 2];
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(csa_graph_random(50, 100, d, 7, &mut g), CsaStatus::Ok);
        let (mut users, mut slots) = (0, 0);
        csa_graph_size(g, &mut users, &mut slots);
        assert_eq!((users, slots), (50, 100));
        csa_graph_free(g);
        assert_eq!(csa_sweep(d, 200, loads.as_ptr(), 2, 10, 3, rows.as_mut_ptr()), CsaStatus::Ok);
        assert_eq!(csa_sweep(d, 0, loads.as_ptr(), 2, 10, 3, rows.as_mut_ptr()), CsaStatus::InvalidArgument);
        csa_distribution_free(d);
    }
    let spec = csa_core::harness::SweepSpec::new(
        csa_core::harness::Scheme::Repetition("2:1".parse().unwrap()),
        loads.to_vec(),
        200,
        10,
        3,
    );
    let report = csa_core::harness::run_sweep(&spec).unwrap();
    for (row, want) in rows.iter().zip(&report.rows) {
        assert_eq!(row.throughput, want.throughput);
        assert_eq!(row.plr, want.plr);
        assert_eq!(row.trials, 10);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(csa_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
