use std::ffi::{CStr, CString};
use std::ptr;

use bottlenecklab_ffi::*;

fn cs(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = bl_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn model_lifecycle_and_local_check() {
    let mut m = ptr::null_mut();
    let name = cs("ising_ring(4)");
    assert_eq!(unsafe { bl_model_new(name.as_ptr(), &mut m) }, BlStatus::Ok);
    assert!(!m.is_null());
    assert_eq!(unsafe { bl_model_num_qubits(m) }, 4);
    let mut r = BlBottleneckResult::default();
    assert_eq!(unsafe { bl_verify_local(m, 2.0, 1, -1, &mut r) }, BlStatus::Ok);
    assert!(r.holds);
    assert!(r.lhs <= r.bound + 1e-8);
    assert!(r.delta > 0.0 && r.r >= 1);
    assert!(bl_last_error_message().is_null());
    unsafe { bl_model_free(m) };
}

#[test]
fn classical_check() {
    let mut m = ptr::null_mut();
    let name = cs("repetition(6)");
    assert_eq!(unsafe { bl_model_new(name.as_ptr(), &mut m) }, BlStatus::Ok);
    let mut r = BlClassicalResult::default();
    assert_eq!(unsafe { bl_verify_classical(m, 1.0, 0.5, 1, &mut r) }, BlStatus::Ok);
    assert!(r.holds && r.lhs <= r.bound + 1e-12);
    assert!((r.pi_a + r.pi_b + r.pi_c - 1.0).abs() < 1e-12);
    unsafe { bl_model_free(m) };
}

#[test]
fn errors_set_status_and_message() {
    let mut m = ptr::null_mut();
    let name = cs("no_such_model(3)");
    assert_eq!(unsafe { bl_model_new(name.as_ptr(), &mut m) }, BlStatus::ModelNotFound);
    assert!(m.is_null());
    assert!(last_error().contains("ModelNotFound"));

    assert_eq!(unsafe { bl_model_new(ptr::null(), &mut m) }, BlStatus::NullPointer);
    let mut r = BlBottleneckResult::default();
    assert_eq!(unsafe { bl_verify_local(ptr::null(), 1.0, 1, -1, &mut r) }, BlStatus::NullPointer);

    let name = cs("steane7");
    assert_eq!(unsafe { bl_model_new(name.as_ptr(), &mut m) }, BlStatus::Ok);
    let mut c = BlClassicalResult::default();
    assert_eq!(unsafe { bl_verify_classical(m, 1.0, 0.5, 1, &mut c) }, BlStatus::InvalidArgument);
    assert_eq!(unsafe { bl_verify_local(m, -1.0, 1, -1, &mut r) }, BlStatus::InvalidArgument);
    unsafe { bl_model_free(m) };
    unsafe { bl_model_free(ptr::null_mut()) };
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = cs(dir.path().join("o").to_str().unwrap());
    let cfg = cs(r#"{"models": ["ising_ring(4)"], "betas": [1.0]}"#);
    assert_eq!(unsafe { bl_run(cs("verify-quantum").as_ptr(), cfg.as_ptr(), out.as_ptr(), 1) }, BlStatus::Ok);
    assert!(dir.path().join("o/report.csv").exists());

    let cfg = cs(r#"{"models": ["steane7"], "betas": [1.0]}"#);
    assert_eq!(unsafe { bl_run(cs("verify-quantum").as_ptr(), cfg.as_ptr(), out.as_ptr(), 2) }, BlStatus::AssertionFailed);
    assert!(last_error().contains("product_drift"));

    assert_eq!(unsafe { bl_run(cs("frobnicate").as_ptr(), cfg.as_ptr(), out.as_ptr(), 1) }, BlStatus::InvalidArgument);
    let bad = cs(r#"{"modles": []}"#);
    assert_eq!(unsafe { bl_run(cs("model-info").as_ptr(), bad.as_ptr(), out.as_ptr(), 1) }, BlStatus::ConfigInvalid);
}

#[test]
fn header_declares_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/bottlenecklab.h")).unwrap();
    for sym in ["bl_model_new", "bl_model_free", "bl_verify_local", "bl_verify_classical", "bl_run", "bl_last_error_message", "BL_STATUS_OK", "typedef struct BlModel BlModel"] {
        assert!(h.contains(sym), "{sym} missing from header");
    }
    assert!(!unsafe { CStr::from_ptr(bl_version()) }.to_str().unwrap().is_empty());
}
