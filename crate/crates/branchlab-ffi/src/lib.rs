//! C ABI for the branchlab library.
//!
//! Every function returns a [`BlStatus`] code and writes results through
//! out-pointers. States and branch decompositions are opaque handles that
//! must be released with the matching `_free` function. All entry points
//! catch panics; no exception ever crosses the boundary.

use std::os::raw::{c_char, c_double, c_int};
use std::panic::{catch_unwind, AssertUnwindSafe};

use branchlab::branching::{
    optimize_branches, q_value, sample_branch, BranchDecomposition, BranchOracle,
    BranchSearchConfig,
};
use branchlab::complexity::bounds::{
    build_extended_trajectory, build_point_pair_trajectory, kappa, lambda, lower_bound_extended,
    lower_bound_point_pair, omega_extended_state, omega_state, point_pair_start,
};
use branchlab::complexity::optimize::{optimize_complexity, OptimizerConfig};
use branchlab::error::Error;
use branchlab::experiments::{bell_ensemble, bell_single, separation_condition, BellConfig};
use branchlab::fock::{LatticeGeometry, StateVector};
use branchlab::opspace::lie_closure;

/// Status codes returned by every API call (mirrors the CLI exit codes).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlStatus {
    /// Success.
    Ok = 0,
    /// A panic crossed an API boundary (internal bug).
    Panic = 1,
    /// Invalid argument, null pointer, or out-of-range parameter.
    Argument = 2,
    /// The request exceeds a configured size cap.
    CapExceeded = 3,
    /// An iterative procedure did not reach its tolerance.
    NonConverged = 4,
}

fn status_of(err: &Error) -> BlStatus {
    match err {
        Error::Domain(_) => BlStatus::Argument,
        Error::CapExceeded(_) => BlStatus::CapExceeded,
        Error::NonConverged(_) => BlStatus::NonConverged,
    }
}

fn guarded(f: impl FnOnce() -> BlStatus) -> BlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => BlStatus::Panic,
    }
}

/// Opaque sector state handle.
pub struct BlState {
    inner: StateVector,
}

/// Opaque branch-decomposition handle.
pub struct BlBranches {
    inner: BranchDecomposition,
}

/// Library version as a static null-terminated string.
#[no_mangle]
pub extern "C" fn bl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Point-pair cost bounds at distance `n`: analytic lower bound and the
/// constructive upper bound.
#[no_mangle]
pub extern "C" fn bl_bounds_point_pair(
    n: usize,
    lower: *mut c_double,
    upper: *mut c_double,
) -> BlStatus {
    guarded(|| {
        if lower.is_null() || upper.is_null() {
            return BlStatus::Argument;
        }
        match lower_bound_point_pair(n) {
            Ok(lo) => {
                let geometry = LatticeGeometry::chain(n + 1);
                let traj = build_point_pair_trajectory(&geometry, n).expect("n validated");
                unsafe {
                    *lower = lo;
                    *upper = traj.cost();
                }
                BlStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Extended-state cost bounds at distance `n` and width `r`.
#[no_mangle]
pub extern "C" fn bl_bounds_extended(
    n: usize,
    r: usize,
    lower: *mut c_double,
    upper: *mut c_double,
) -> BlStatus {
    guarded(|| {
        if lower.is_null() || upper.is_null() {
            return BlStatus::Argument;
        }
        let lo = match lower_bound_extended(n, r) {
            Ok(v) => v,
            Err(e) => return status_of(&e),
        };
        let geometry = LatticeGeometry::chain(n + r);
        let traj = match build_extended_trajectory(&geometry, n, r) {
            Ok(t) => t,
            Err(e) => return status_of(&e),
        };
        unsafe {
            *lower = lo;
            *upper = traj.cost();
        }
        BlStatus::Ok
    })
}

/// `κ(r)`, the width coefficient of the extended lower bound.
#[no_mangle]
pub extern "C" fn bl_kappa(r: usize, out: *mut c_double) -> BlStatus {
    guarded(|| {
        if out.is_null() {
            return BlStatus::Argument;
        }
        match kappa(r) {
            Ok(v) => {
                unsafe { *out = v };
                BlStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// `λ(r)`, the width coefficient of the extended constructive cost.
#[no_mangle]
pub extern "C" fn bl_lambda(r: usize, out: *mut c_double) -> BlStatus {
    guarded(|| {
        if out.is_null() {
            return BlStatus::Argument;
        }
        match lambda(r) {
            Ok(v) => {
                unsafe { *out = v };
                BlStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Close the control generators under commutators on every nontrivial
/// sector of an `sites`-site chain and compare against the direct-sum
/// dimension. `pass` receives 1 on an exact match.
#[no_mangle]
pub extern "C" fn bl_lie_closure(
    sites: usize,
    cap: usize,
    closure_dim: *mut usize,
    expected_dim: *mut usize,
    pass: *mut c_int,
) -> BlStatus {
    guarded(|| {
        if closure_dim.is_null() || expected_dim.is_null() || pass.is_null() {
            return BlStatus::Argument;
        }
        if sites < 2 {
            return BlStatus::Argument;
        }
        let geometry = LatticeGeometry::chain(sites);
        let sectors: Vec<u32> = (1..=(2 * sites - 1) as u32).collect();
        match lie_closure(&geometry, &sectors, cap) {
            Ok(report) => {
                unsafe {
                    *closure_dim = report.closure_dim;
                    *expected_dim = report.expected_dim;
                    *pass = report.pass as c_int;
                }
                BlStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Branch weights of the Bell model at analyzer angle `theta`, in the
/// order (uu, ud, du, dd). `weights` must hold four doubles.
#[no_mangle]
pub extern "C" fn bl_bell_weights(theta: c_double, weights: *mut c_double) -> BlStatus {
    guarded(|| {
        if weights.is_null() {
            return BlStatus::Argument;
        }
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return BlStatus::Argument;
        }
        let branches = bell_single(theta);
        for (i, b) in branches.iter().enumerate() {
            unsafe { *weights.add(i) = b.weight };
        }
        BlStatus::Ok
    })
}

/// Replica-ensemble spin correlation of the Bell model.
#[no_mangle]
pub extern "C" fn bl_bell_correlation(
    theta: c_double,
    replicas: usize,
    seed: u64,
    correlation: *mut c_double,
    std_error: *mut c_double,
) -> BlStatus {
    guarded(|| {
        if correlation.is_null() || std_error.is_null() {
            return BlStatus::Argument;
        }
        let cfg = BellConfig {
            theta,
            q: 1.0,
            w: 1.0,
            d: 1.0,
            m: 1.0,
            replicas,
            seed,
        };
        match bell_ensemble(&cfg) {
            Ok(out) => {
                unsafe {
                    *correlation = out.correlation;
                    *std_error = out.std_error;
                }
                BlStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Complete-separation condition of the Stern-Gerlach impulse:
/// returns 1 when `r > 1/(2√2·d)`.
#[no_mangle]
pub extern "C" fn bl_separation_condition(r: c_double, d: c_double) -> c_int {
    separation_condition(r, d) as c_int
}

/// Create the entangled point-pair state at distance `n` on a chain.
#[no_mangle]
pub extern "C" fn bl_state_point_pair(
    sites: usize,
    n: usize,
    out: *mut *mut BlState,
) -> BlStatus {
    guarded(|| {
        if out.is_null() {
            return BlStatus::Argument;
        }
        if sites < 2 || n + 1 > sites {
            return BlStatus::Argument;
        }
        let geometry = LatticeGeometry::chain(sites);
        match omega_state(&geometry, n) {
            Ok(state) => {
                unsafe { *out = Box::into_raw(Box::new(BlState { inner: state })) };
                BlStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Create the extended entangled state (distance `n`, width `r`).
#[no_mangle]
pub extern "C" fn bl_state_extended(
    sites: usize,
    n: usize,
    r: usize,
    out: *mut *mut BlState,
) -> BlStatus {
    guarded(|| {
        if out.is_null() {
            return BlStatus::Argument;
        }
        if sites < 2 || n + r > sites {
            return BlStatus::Argument;
        }
        let geometry = LatticeGeometry::chain(sites);
        match omega_extended_state(&geometry, n, r) {
            Ok(state) => {
                unsafe { *out = Box::into_raw(Box::new(BlState { inner: state })) };
                BlStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Release a state handle.
#[no_mangle]
pub extern "C" fn bl_state_free(state: *mut BlState) {
    if !state.is_null() {
        drop(unsafe { Box::from_raw(state) });
    }
}

/// Norm of a state.
#[no_mangle]
pub extern "C" fn bl_state_norm(state: *const BlState, out: *mut c_double) -> BlStatus {
    guarded(|| {
        if state.is_null() || out.is_null() {
            return BlStatus::Argument;
        }
        unsafe { *out = (*state).inner.norm() };
        BlStatus::Ok
    })
}

/// Two-sided complexity estimate between a state and the adjacent-pair
/// product start, warm-started with the constructive schedule when the
/// state is one of the reference targets.
#[no_mangle]
pub extern "C" fn bl_complexity_reference(
    sites: usize,
    n: usize,
    r: usize,
    steps: usize,
    restarts: usize,
    seed: u64,
    lower: *mut c_double,
    upper: *mut c_double,
) -> BlStatus {
    guarded(|| {
        if lower.is_null() || upper.is_null() {
            return BlStatus::Argument;
        }
        if sites < 2 {
            return BlStatus::Argument;
        }
        let geometry = LatticeGeometry::chain(sites);
        let built = if r == 0 {
            omega_state(&geometry, n).and_then(|t| {
                build_point_pair_trajectory(&geometry, n).map(|w| (t, w))
            })
        } else {
            omega_extended_state(&geometry, n, r).and_then(|t| {
                build_extended_trajectory(&geometry, n, r).map(|w| (t, w))
            })
        };
        let (target, warm) = match built {
            Ok(pair) => pair,
            Err(e) => return status_of(&e),
        };
        let start = match point_pair_start(&geometry) {
            Ok(s) => s,
            Err(e) => return status_of(&e),
        };
        let cfg = OptimizerConfig {
            steps: (steps > 0).then_some(steps),
            restarts,
            seed,
            warm_starts: vec![warm],
            ..OptimizerConfig::default()
        };
        match optimize_complexity(&target, &start, &cfg) {
            Ok(est) => {
                unsafe {
                    *lower = est.lower;
                    *upper = est.upper;
                }
                BlStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Decompose a state into branches at threshold `b` with the analytic
/// Schmidt-angle complexity oracle.
#[no_mangle]
pub extern "C" fn bl_branch_decompose(
    state: *const BlState,
    b: c_double,
    seed: u64,
    out: *mut *mut BlBranches,
) -> BlStatus {
    guarded(|| {
        if state.is_null() || out.is_null() {
            return BlStatus::Argument;
        }
        let psi = unsafe { &(*state).inner };
        let cfg = BranchSearchConfig {
            seed,
            ..BranchSearchConfig::default()
        };
        match optimize_branches(psi, b, &BranchOracle::SchmidtAngle, &cfg) {
            Ok(decomp) => {
                unsafe { *out = Box::into_raw(Box::new(BlBranches { inner: decomp })) };
                BlStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Release a branch-decomposition handle.
#[no_mangle]
pub extern "C" fn bl_branches_free(branches: *mut BlBranches) {
    if !branches.is_null() {
        drop(unsafe { Box::from_raw(branches) });
    }
}

/// Number of branches in a decomposition.
#[no_mangle]
pub extern "C" fn bl_branches_count(branches: *const BlBranches, out: *mut usize) -> BlStatus {
    guarded(|| {
        if branches.is_null() || out.is_null() {
            return BlStatus::Argument;
        }
        unsafe { *out = (*branches).inner.branches.len() };
        BlStatus::Ok
    })
}

/// Weight of branch `index`.
#[no_mangle]
pub extern "C" fn bl_branches_weight(
    branches: *const BlBranches,
    index: usize,
    out: *mut c_double,
) -> BlStatus {
    guarded(|| {
        if branches.is_null() || out.is_null() {
            return BlStatus::Argument;
        }
        let inner = unsafe { &(*branches).inner };
        match inner.branches.get(index) {
            Some(br) => {
                unsafe { *out = br.weight };
                BlStatus::Ok
            }
            None => BlStatus::Argument,
        }
    })
}

/// Complexity of branch `index` (normalized direction).
#[no_mangle]
pub extern "C" fn bl_branches_complexity(
    branches: *const BlBranches,
    index: usize,
    out: *mut c_double,
) -> BlStatus {
    guarded(|| {
        if branches.is_null() || out.is_null() {
            return BlStatus::Argument;
        }
        let inner = unsafe { &(*branches).inner };
        match inner.branches.get(index) {
            Some(br) => {
                unsafe { *out = br.complexity };
                BlStatus::Ok
            }
            None => BlStatus::Argument,
        }
    })
}

/// The decomposition's Q value.
#[no_mangle]
pub extern "C" fn bl_branches_q(branches: *const BlBranches, out: *mut c_double) -> BlStatus {
    guarded(|| {
        if branches.is_null() || out.is_null() {
            return BlStatus::Argument;
        }
        unsafe { *out = q_value(&(*branches).inner) };
        BlStatus::Ok
    })
}

/// Draw a branch index with Born weights; reproducible per seed.
#[no_mangle]
pub extern "C" fn bl_branches_sample(
    branches: *const BlBranches,
    seed: u64,
    out: *mut usize,
) -> BlStatus {
    guarded(|| {
        if branches.is_null() || out.is_null() {
            return BlStatus::Argument;
        }
        let (index, _renormalized) = sample_branch(unsafe { &(*branches).inner }, seed);
        unsafe { *out = index };
        BlStatus::Ok
    })
}
