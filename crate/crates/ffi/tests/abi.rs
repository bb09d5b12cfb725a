use std::ffi::{CStr, CString};
use std::ptr;

use fogcap_ffi::*;

struct Handle(*mut FogScenario);

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { fog_scenario_free(self.0) };
    }
}

fn reference(deadline: f64) -> Handle {
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(fog_scenario_new(20.0, deadline, &mut s), FogStatus::Ok);
        for m in [4.0, 8.0, 6.0] {
            assert_eq!(fog_scenario_add_gaussian(s, m, 1.0), FogStatus::Ok);
        }
    }
    Handle(s)
}

fn last_error() -> String {
    let p = fog_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn stop_loss_values() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(fog_stop_loss_gaussian(0.0, 1.0, 0.0, &mut v), FogStatus::Ok);
        assert!((v - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert_eq!(fog_stop_loss_uniform(7.0, 9.0, 8.8, &mut v), FogStatus::Ok);
        assert!((v - 0.01).abs() < 1e-15);
        assert_eq!(fog_stop_loss_gaussian(0.0, -1.0, 0.0, &mut v), FogStatus::InvalidParameter);
        assert!(last_error().contains("invalid parameter"));
        assert_eq!(fog_stop_loss_uniform(0.0, 1.0, 0.0, ptr::null_mut()), FogStatus::NullPointer);
    }
}

#[test]
fn scenario_queries() {
    let s = reference(0.1);
    let mut n = 0usize;
    let (mut lo, mut hi, mut open) = (0.0, 0.0, false);
    unsafe {
        assert_eq!(fog_scenario_num_cloudlets(s.0, &mut n), FogStatus::Ok);
        assert_eq!(n, 3);
        assert_eq!(fog_convexity_range(s.0, &mut lo, &mut hi, &mut open), FogStatus::Ok);
    }
    assert!((lo - 18.318195).abs() < 1e-12);
    assert_eq!(hi, 20.0);
    assert!(open);
}

#[test]
fn objectives_and_errors() {
    let s = reference(0.1);
    let qle = fog_method_default(FogMethodKind::Qle);
    let gd1 = fog_method_default(FogMethodKind::Gd1);
    let mut v = f64::NAN;
    unsafe {
        assert_eq!(fog_expected_overflow(s.0, 0.0, &qle, &mut v), FogStatus::Ok);
        // Gaussian marginals put a little mass below zero: E(X)+ exceeds the mean slightly.
        assert!(v > 18.0 && v - 18.0 < 1e-4);
        assert_eq!(fog_fractional_objective(s.0, 20.0, &qle, &mut v), FogStatus::Domain);
        let before = v;
        assert_eq!(fog_expected_overflow(s.0, 10.0, &gd1, &mut v), FogStatus::Validity);
        assert_eq!(v, before, "output untouched on failure");
        assert!(last_error().contains("validity"));
        assert_eq!(fog_expected_overflow(s.0, 19.0, &gd1, &mut v), FogStatus::Ok);
        assert!(fog_last_error().is_null());
        assert!(v > 0.0 && v < 1.0);
    }
}

#[test]
fn simulation_and_optimization() {
    let s = reference(0.1);
    let mut sim = FogSimResult::default();
    let mut opt = FogOptimizeResult::default();
    let qle = fog_method_default(FogMethodKind::Qle);
    unsafe {
        assert_eq!(fog_simulate(s.0, 18.0, 20_000, 3, &mut sim), FogStatus::Ok);
        assert_eq!(sim.alpha, 18.0);
        assert!(sim.loss_probability > 0.0 && sim.loss_probability < 0.05);
        assert!(sim.conservation_residual < 1e-9);
        assert_eq!(fog_simulate(s.0, 21.0, 20_000, 3, &mut sim), FogStatus::Domain);

        assert_eq!(fog_algorithm1(s.0, &qle, 0.01, 2000, ptr::null(), &mut opt), FogStatus::Ok);
        assert!(opt.feasible && opt.iterations > 0);
        assert!(opt.alpha_star > 18.0 && opt.alpha_star < 19.0);
        let caps = [1.0, 1.0, 1.0];
        let mut capped = FogOptimizeResult::default();
        assert_eq!(fog_algorithm1(s.0, &qle, 0.01, 2000, caps.as_ptr(), &mut capped), FogStatus::Ok);
        assert_eq!(capped.alpha_star, opt.alpha_star);
        assert_eq!(fog_algorithm1(s.0, &qle, 0.0, 2000, ptr::null(), &mut opt), FogStatus::InvalidParameter);
    }
}

#[test]
fn construction_errors() {
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(fog_scenario_new(-1.0, 0.0, &mut s), FogStatus::InvalidParameter);
        assert!(s.is_null());
        assert_eq!(fog_scenario_new(1.0, 0.0, ptr::null_mut()), FogStatus::NullPointer);
        assert_eq!(fog_scenario_add_gaussian(ptr::null_mut(), 1.0, 1.0), FogStatus::NullPointer);
        fog_scenario_free(ptr::null_mut());
    }
    let h = reference(0.0);
    let mut v = 0.0;
    let qle = fog_method_default(FogMethodKind::Qle);
    unsafe {
        assert_eq!(fog_scenario_add_ar1(h.0, 1.0, 1.0, 1.5), FogStatus::InvalidParameter);
        assert_eq!(fog_scenario_add_uniform(h.0, 2.0, 3.0), FogStatus::Ok);
        // Means now sum to 20.5 > C: unstable.
        assert_eq!(fog_expected_overflow(h.0, 5.0, &qle, &mut v), FogStatus::InvalidParameter);
        assert_eq!(fog_scenario_set_deadline(h.0, -1.0), FogStatus::InvalidParameter);
    }
}

#[test]
fn trace_loading() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    std::fs::write(&path, "timestamp_s,count\n0,50\n1,70\n2,60\n3,65\n").unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let missing = CString::new(dir.path().join("nope.csv").to_str().unwrap()).unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "timestamp_s,count\n0,5\n1,x\n").unwrap();
    let cbad = CString::new(bad.to_str().unwrap()).unwrap();
    let mut s = ptr::null_mut();
    let mut n = 0usize;
    unsafe {
        assert_eq!(fog_scenario_new(20.0, 0.0, &mut s), FogStatus::Ok);
        let h = Handle(s);
        assert_eq!(fog_scenario_add_trace(h.0, cpath.as_ptr(), 1, 0.1), FogStatus::Ok);
        assert_eq!(fog_scenario_add_trace(h.0, missing.as_ptr(), 1, 0.1), FogStatus::Io);
        assert_eq!(fog_scenario_add_trace(h.0, cbad.as_ptr(), 1, 0.1), FogStatus::Parse);
        assert!(last_error().contains(":3:"));
        assert_eq!(fog_scenario_add_trace(h.0, ptr::null(), 1, 0.1), FogStatus::NullPointer);
        assert_eq!(fog_scenario_num_cloudlets(h.0, &mut n), FogStatus::Ok);
        assert_eq!(n, 1);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(fog_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
