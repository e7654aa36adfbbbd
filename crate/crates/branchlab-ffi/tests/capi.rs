//! Exercise the C ABI exactly as a foreign binding would: through the
//! exported extern "C" functions, raw pointers and all.

use std::ffi::CStr;
use std::f64::consts::PI;
use std::ptr;

use branchlab_ffi::*;

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(bl_version()) };
    assert!(!v.to_str().unwrap().is_empty());
}

#[test]
fn point_pair_bounds_match_reference_values() {
    let (mut lower, mut upper) = (0.0f64, 0.0f64);
    let status = bl_bounds_point_pair(2, &mut lower, &mut upper);
    assert_eq!(status, BlStatus::Ok);
    assert!((lower - PI / (4.0 * 2f64.sqrt())).abs() < 1e-12);
    assert!((upper - (PI + PI / (2.0 * 2f64.sqrt()))).abs() < 1e-12);
}

#[test]
fn extended_bounds_and_coefficients() {
    let (mut lower, mut upper) = (0.0f64, 0.0f64);
    assert_eq!(bl_bounds_extended(2, 2, &mut lower, &mut upper), BlStatus::Ok);
    assert!(lower < upper);
    let mut k = 0.0f64;
    assert_eq!(bl_kappa(2, &mut k), BlStatus::Ok);
    assert!((k - PI / 12.0).abs() < 1e-12);
    let mut l = 0.0f64;
    assert_eq!(bl_lambda(2, &mut l), BlStatus::Ok);
    assert!((l - PI / 8.0).abs() < 1e-12);
}

#[test]
fn invalid_arguments_return_code_2() {
    let mut x = 0.0f64;
    assert_eq!(bl_kappa(1, &mut x), BlStatus::Argument);
    assert_eq!(
        bl_bounds_point_pair(2, ptr::null_mut(), &mut x),
        BlStatus::Argument
    );
    assert_eq!(bl_bell_weights(4.0, &mut x), BlStatus::Argument);
}

#[test]
fn lie_closure_two_sites() {
    let (mut dim, mut expected, mut pass) = (0usize, 0usize, 0i32);
    let status = bl_lie_closure(2, 200, &mut dim, &mut expected, &mut pass);
    assert_eq!(status, BlStatus::Ok);
    assert_eq!(dim, 65);
    assert_eq!(expected, 65);
    assert_eq!(pass, 1);
}

#[test]
fn lie_closure_cap_returns_code_3() {
    let (mut dim, mut expected, mut pass) = (0usize, 0usize, 0i32);
    assert_eq!(
        bl_lie_closure(4, 100, &mut dim, &mut expected, &mut pass),
        BlStatus::CapExceeded
    );
}

#[test]
fn bell_weights_and_correlation() {
    let mut weights = [0.0f64; 4];
    assert_eq!(bl_bell_weights(PI / 3.0, weights.as_mut_ptr()), BlStatus::Ok);
    assert!((weights[0] - 0.125).abs() < 1e-12);
    assert!((weights[1] - 0.375).abs() < 1e-12);
    let (mut corr, mut se) = (0.0f64, 0.0f64);
    assert_eq!(
        bl_bell_correlation(PI / 2.0, 10_000, 7, &mut corr, &mut se),
        BlStatus::Ok
    );
    assert!(corr.abs() < 3.0 * se, "corr {corr} se {se}");
}

#[test]
fn separation_condition_flag() {
    assert_eq!(bl_separation_condition(1.0, 1.0), 1);
    assert_eq!(bl_separation_condition(0.1, 1.0), 0);
}

#[test]
fn state_and_branch_lifecycle() {
    let mut state: *mut BlState = ptr::null_mut();
    assert_eq!(bl_state_point_pair(3, 2, &mut state), BlStatus::Ok);
    assert!(!state.is_null());
    let mut norm = 0.0f64;
    assert_eq!(bl_state_norm(state, &mut norm), BlStatus::Ok);
    assert!((norm - 1.0).abs() < 1e-12);

    let mut branches: *mut BlBranches = ptr::null_mut();
    assert_eq!(bl_branch_decompose(state, 1e-6, 0, &mut branches), BlStatus::Ok);
    let mut count = 0usize;
    assert_eq!(bl_branches_count(branches, &mut count), BlStatus::Ok);
    assert_eq!(count, 2);
    for i in 0..count {
        let mut w = 0.0f64;
        assert_eq!(bl_branches_weight(branches, i, &mut w), BlStatus::Ok);
        assert!((w - 0.5).abs() < 1e-9);
        let mut c = 0.0f64;
        assert_eq!(bl_branches_complexity(branches, i, &mut c), BlStatus::Ok);
        assert!(c < 1e-9);
    }
    let mut q = 0.0f64;
    assert_eq!(bl_branches_q(branches, &mut q), BlStatus::Ok);
    assert!(q < 1e-5);
    let mut idx = 99usize;
    assert_eq!(bl_branches_sample(branches, 5, &mut idx), BlStatus::Ok);
    assert!(idx < 2);
    // Out-of-range branch index is an argument error.
    let mut w = 0.0f64;
    assert_eq!(bl_branches_weight(branches, 7, &mut w), BlStatus::Argument);

    bl_branches_free(branches);
    bl_state_free(state);
}

#[test]
fn reference_complexity_sandwich_via_ffi() {
    let (mut lower, mut upper) = (0.0f64, 0.0f64);
    let status = bl_complexity_reference(3, 2, 0, 8, 1, 3, &mut lower, &mut upper);
    assert_eq!(status, BlStatus::Ok);
    let floor = PI / (4.0 * 2f64.sqrt());
    let ceiling = PI + PI / (2.0 * 2f64.sqrt());
    assert!(lower <= upper);
    assert!(upper >= floor && upper <= ceiling + 1e-6, "upper {upper}");
}
