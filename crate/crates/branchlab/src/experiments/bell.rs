//! A four-particle Bell correlation model on a chain.
//!
//! Particles 0 and 1 form a spin singlet; particles 2 and 3 are the
//! analyzers, prepared in the z basis and in a basis rotated by θ. The
//! spin-selective collisions leave four branches labelled by the measured
//! outcomes `(e₀, e₁)` with weights
//! `(½sin²(θ/2), ½cos²(θ/2), ½cos²(θ/2), ½sin²(θ/2))` in the order
//! `(uu, ud, du, dd)`, and replica sampling of those weights estimates the
//! spin correlation `-cos θ`.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{
    apply_creation, vacuum_state, FockState, LatticeGeometry, SiteOcc, Spin, StateVector,
};
use crate::linalg::CMat;

/// Measured outcome of one analyzer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    U,
    D,
}

/// Model parameters for the replica ensemble.
#[derive(Debug, Clone, Serialize)]
pub struct BellConfig {
    /// Analyzer angle in radians, `0 ≤ θ ≤ π`.
    pub theta: f64,
    /// Packet parameters carried in the report.
    pub q: f64,
    pub w: f64,
    pub d: f64,
    pub m: f64,
    /// Replica count.
    pub replicas: usize,
    pub seed: u64,
}

impl BellConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=std::f64::consts::PI).contains(&self.theta) {
            return Err(Error::domain("theta must lie in [0, π]"));
        }
        if self.replicas == 0 {
            return Err(Error::domain("replica count must be at least 1"));
        }
        Ok(())
    }
}

/// One Bell branch: outcomes, weight, and the packet bookkeeping of the
/// four particles after the collisions.
#[derive(Debug, Clone, Serialize)]
pub struct BellBranch {
    pub e0: Outcome,
    pub e1: Outcome,
    pub weight: f64,
    /// Post-collision momenta of particles 0..3.
    pub momenta: [f64; 4],
    /// Initial positions that place the packet means at the collision
    /// points at the collision time.
    pub x_in: [f64; 4],
    /// Spin wave functions (up, down) of particles 0 and 1 in the branch.
    pub spin0: [f64; 2],
    pub spin1: [f64; 2],
}

/// Analyzer basis vectors: `u(θ) = (cos θ/2, sin θ/2)` and its orthogonal
/// complement `d(θ) = (-sin θ/2, cos θ/2)`.
fn analyzer(theta: f64, outcome: Outcome) -> [f64; 2] {
    let (s, c) = (theta / 2.0).sin_cos();
    match outcome {
        Outcome::U => [c, s],
        Outcome::D => [-s, c],
    }
}

/// The four weighted branches for analyzer angle θ (unit packet scales).
pub fn bell_single(theta: f64) -> [BellBranch; 4] {
    bell_single_with(theta, 1.0, 1.0)
}

/// The four weighted branches with explicit momentum and offset scales:
/// base momenta `(q, -q, -q, q)`, base positions `(w, -w, 3w, -3w)`.
pub fn bell_single_with(theta: f64, q: f64, w: f64) -> [BellBranch; 4] {
    let (s, c) = (theta / 2.0).sin_cos();
    let weights = [
        0.5 * s * s, // uu
        0.5 * c * c, // ud
        0.5 * c * c, // du
        0.5 * s * s, // dd
    ];
    let base_k = [q, -q, -q, q];
    // Collision points: particles (0,2) meet at +2w, particles (1,3) at -2w,
    // both at t_c = m·w/q; new initial positions keep the means there.
    let collision = [2.0 * w, -2.0 * w, 2.0 * w, -2.0 * w];
    let outcomes = [
        (Outcome::U, Outcome::U),
        (Outcome::U, Outcome::D),
        (Outcome::D, Outcome::U),
        (Outcome::D, Outcome::D),
    ];
    let mut branches = Vec::with_capacity(4);
    for (i, &(e0, e1)) in outcomes.iter().enumerate() {
        let mut momenta = base_k;
        if e0 == Outcome::U {
            momenta[0] = -base_k[0];
            momenta[2] = -base_k[2];
        }
        if e1 == Outcome::U {
            momenta[1] = -base_k[1];
            momenta[3] = -base_k[3];
        }
        // x_in = collision - k_new·t_c/m with t_c = m·w/q.
        let mut x_in = [0.0; 4];
        for p in 0..4 {
            x_in[p] = collision[p] - momenta[p] * w / q;
        }
        branches.push(BellBranch {
            e0,
            e1,
            weight: weights[i],
            momenta,
            x_in,
            spin0: match e0 {
                Outcome::U => [1.0, 0.0],
                Outcome::D => [0.0, 1.0],
            },
            spin1: analyzer(theta, e1),
        });
    }
    branches.try_into().expect("four branches")
}

/// Replica-ensemble outcome tallies and the correlation estimate.
#[derive(Debug, Clone, Serialize)]
pub struct BellOutcome {
    pub theta: f64,
    pub replicas: usize,
    pub agree: usize,
    pub disagree: usize,
    /// `(agree - disagree)/N`.
    pub correlation: f64,
    /// CLT standard error `2√(p(1-p)/N)` with `p = sin²(θ/2)`.
    pub std_error: f64,
    pub expected: f64,
}

/// Sample one replica's `(e₀, e₁)` from the branch weights; the replica
/// index derives an independent stream so the draw is reproducible and
/// thread-count independent.
fn sample_pair(weights: &[f64; 4], seed: u64, replica: u64) -> (Outcome, Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica.wrapping_add(1));
    let u: f64 = rng.gen_range(0.0..1.0);
    let outcomes = [
        (Outcome::U, Outcome::U),
        (Outcome::U, Outcome::D),
        (Outcome::D, Outcome::U),
        (Outcome::D, Outcome::D),
    ];
    let mut acc = 0.0;
    for (i, &o) in outcomes.iter().enumerate() {
        acc += weights[i];
        if u < acc {
            return o;
        }
    }
    outcomes[3]
}

/// Run the replica ensemble: each copy draws its outcome pair independently
/// from the branch weights (the joint weight factorizes over replicas).
pub fn bell_ensemble(cfg: &BellConfig) -> Result<BellOutcome> {
    cfg.validate()?;
    let branches = bell_single(cfg.theta);
    let weights = [
        branches[0].weight,
        branches[1].weight,
        branches[2].weight,
        branches[3].weight,
    ];
    let mut agree = 0usize;
    for i in 0..cfg.replicas {
        let (e0, e1) = sample_pair(&weights, cfg.seed, i as u64);
        if e0 == e1 {
            agree += 1;
        }
    }
    let disagree = cfg.replicas - agree;
    let p = (cfg.theta / 2.0).sin().powi(2);
    Ok(BellOutcome {
        theta: cfg.theta,
        replicas: cfg.replicas,
        agree,
        disagree,
        correlation: (agree as f64 - disagree as f64) / cfg.replicas as f64,
        std_error: 2.0 * (p * (1.0 - p) / cfg.replicas as f64).sqrt(),
        expected: -cfg.theta.cos(),
    })
}

/// Exact correlation expectation from exhaustive enumeration of all `4^N`
/// outcome tuples under the product measure (validation oracle, `N ≤ 8`).
pub fn exhaustive_expected_correlation(theta: f64, replicas: usize) -> Result<f64> {
    if replicas > 8 {
        return Err(Error::cap("exhaustive enumeration limited to N ≤ 8"));
    }
    let branches = bell_single(theta);
    let weights: Vec<f64> = branches.iter().map(|b| b.weight).collect();
    let agree = [true, false, false, true];
    let mut expectation = 0.0;
    for tuple in 0..4usize.pow(replicas as u32) {
        let mut prob = 1.0;
        let mut sum = 0i64;
        let mut rest = tuple;
        for _ in 0..replicas {
            let o = rest % 4;
            rest /= 4;
            prob *= weights[o];
            sum += if agree[o] { 1 } else { -1 };
        }
        expectation += prob * sum as f64 / replicas as f64;
    }
    Ok(expectation)
}

/// Verification report of the lattice realization of the branch algebra.
#[derive(Debug, Clone, Serialize)]
pub struct BellCheckReport {
    pub theta: f64,
    pub weights: [f64; 4],
    pub expected: [f64; 4],
    pub max_weight_deviation: f64,
    /// `‖ψ‖ - 1` of the assembled four-particle state.
    pub norm_defect: f64,
    /// `‖Σ branches - ψ‖`.
    pub reassembly_defect: f64,
    /// Largest pairwise branch overlap.
    pub orthogonality_defect: f64,
    /// Largest weight shift under rotating the state and both analyzers by
    /// a common spin rotation.
    pub rotation_invariance_deviation: f64,
}

/// Apply a local 4×4 matrix at one site of a sector state (tensor-local).
fn apply_site_matrix(state: &StateVector, site: usize, m: &CMat) -> StateVector {
    let sector = state.sector().clone();
    let mut out = StateVector::zero(sector.clone());
    let site_mask = 0b11u64 << (2 * site);
    for (i, s) in sector.states().iter().enumerate() {
        let a = state.amplitudes()[i];
        if a == C64::new(0.0, 0.0) {
            continue;
        }
        let o = s.occ(site).local_index();
        for op in 0..4 {
            let v = m[(op, o)];
            if v.norm_sqr() == 0.0 {
                continue;
            }
            if SiteOcc::from_local_index(op).count() != SiteOcc::from_local_index(o).count() {
                continue;
            }
            let bits = match op {
                0 => 0u64,
                1 => 0b01,
                2 => 0b10,
                3 => 0b11,
                _ => unreachable!(),
            } << (2 * site);
            let dst = FockState(s.0 & !site_mask | bits);
            let j = sector.index_of(dst).expect("count-preserving move");
            out.amplitudes_mut()[j] += a * v;
        }
    }
    out
}

/// Spin projector `|χ⟩⟨χ|` on one site's single-particle block.
fn spin_projector(chi: [C64; 2]) -> CMat {
    let mut m = CMat::zeros(4, 4);
    for (i, a) in chi.iter().enumerate() {
        for (j, b) in chi.iter().enumerate() {
            // single-particle block sits at local indices 1 (up), 2 (down)
            m[(1 + i, 1 + j)] = a * b.conj();
        }
    }
    m
}

/// Per-site global spin rotation about y by `alpha` (determinant 1 on the
/// doubly occupied state).
fn spin_rotation(alpha: f64) -> CMat {
    let (s, c) = (alpha / 2.0).sin_cos();
    let mut m = CMat::zeros(4, 4);
    m[(0, 0)] = C64::new(1.0, 0.0);
    m[(3, 3)] = C64::new(1.0, 0.0);
    m[(1, 1)] = C64::new(c, 0.0);
    m[(1, 2)] = C64::new(-s, 0.0);
    m[(2, 1)] = C64::new(s, 0.0);
    m[(2, 2)] = C64::new(c, 0.0);
    m
}

fn rotate2(v: [f64; 2], alpha: f64) -> [C64; 2] {
    let (s, c) = (alpha / 2.0).sin_cos();
    [
        C64::new(c * v[0] - s * v[1], 0.0),
        C64::new(s * v[0] + c * v[1], 0.0),
    ]
}

/// Assemble the four-particle spin state on a 4-site chain and decompose it
/// with the two analyzer projectors.
fn decompose_on_lattice(
    theta: f64,
    alpha: f64,
) -> (StateVector, Vec<StateVector>, [f64; 4]) {
    let geom = LatticeGeometry::chain(4);
    let vac = vacuum_state(&geom);
    // Singlet on particles (sites) 0,1; analyzer preparations on 2,3.
    let (s3, c3) = (theta / 2.0).sin_cos();
    let mut psi: Option<StateVector> = None;
    for (s0, s1, w01) in [
        (Spin::Up, Spin::Down, std::f64::consts::FRAC_1_SQRT_2),
        (Spin::Down, Spin::Up, -std::f64::consts::FRAC_1_SQRT_2),
    ] {
        for (spin3, w3) in [(Spin::Up, c3), (Spin::Down, s3)] {
            if w3 == 0.0 {
                continue;
            }
            let state = apply_creation(
                &apply_creation(
                    &apply_creation(&apply_creation(&vac, 0, s0), 1, s1),
                    2,
                    Spin::Up,
                ),
                3,
                spin3,
            )
            .scaled(C64::new(w01 * w3, 0.0));
            psi = Some(match psi {
                None => state,
                Some(acc) => acc.add(&state),
            });
        }
    }
    let mut psi = psi.expect("nonempty");
    if alpha != 0.0 {
        for site in 0..4 {
            psi = apply_site_matrix(&psi, site, &spin_rotation(alpha));
        }
    }
    // Analyzer bases, rotated along with the state.
    let u0 = rotate2([1.0, 0.0], alpha);
    let d0 = rotate2([0.0, 1.0], alpha);
    let u1 = rotate2(analyzer(theta, Outcome::U), alpha);
    let d1 = rotate2(analyzer(theta, Outcome::D), alpha);
    let mut branches = Vec::with_capacity(4);
    let mut weights = [0.0; 4];
    for (i, (b0, b1)) in [(u0, u1), (u0, d1), (d0, u1), (d0, d1)].iter().enumerate() {
        let projected =
            apply_site_matrix(&apply_site_matrix(&psi, 0, &spin_projector(*b0)), 1, &spin_projector(*b1));
        weights[i] = projected.norm().powi(2);
        branches.push(projected);
    }
    (psi, branches, weights)
}

/// Realize the pre/post-collision spin algebra exactly on sector state
/// vectors and compare the four-branch weights with the closed forms.
pub fn bell_state_check(theta: f64) -> Result<BellCheckReport> {
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::domain("theta must lie in [0, π]"));
    }
    let (psi, branches, weights) = decompose_on_lattice(theta, 0.0);
    let (s, c) = (theta / 2.0).sin_cos();
    let expected = [0.5 * s * s, 0.5 * c * c, 0.5 * c * c, 0.5 * s * s];
    let max_weight_deviation = weights
        .iter()
        .zip(expected.iter())
        .map(|(w, e)| (w - e).abs())
        .fold(0.0, f64::max);
    let norm_defect = (psi.norm() - 1.0).abs();
    let mut sum = StateVector::zero(psi.sector().clone());
    for b in &branches {
        sum = sum.add(b);
    }
    let reassembly_defect = sum.sub(&psi).norm();
    let mut orthogonality_defect: f64 = 0.0;
    for i in 0..branches.len() {
        for j in i + 1..branches.len() {
            orthogonality_defect =
                orthogonality_defect.max(branches[i].inner(&branches[j]).norm());
        }
    }
    // Rotating the state and both analyzer bases by a common angle must
    // leave every weight unchanged (the weights depend on θ alone).
    let mut rotation_invariance_deviation: f64 = 0.0;
    for alpha in [0.37, 1.1] {
        let (_, _, rotated) = decompose_on_lattice(theta, alpha);
        for (w, r) in weights.iter().zip(rotated.iter()) {
            rotation_invariance_deviation = rotation_invariance_deviation.max((w - r).abs());
        }
    }
    Ok(BellCheckReport {
        theta,
        weights,
        expected,
        max_weight_deviation,
        norm_defect,
        reassembly_defect,
        orthogonality_defect,
        rotation_invariance_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

    #[test]
    fn single_weights_at_reference_angles() {
        let w0 = bell_single(0.0);
        assert!(w0[0].weight.abs() < 1e-15 && w0[3].weight.abs() < 1e-15);
        assert!((w0[1].weight - 0.5).abs() < 1e-15 && (w0[2].weight - 0.5).abs() < 1e-15);
        let w90: f64 = bell_single(FRAC_PI_2).iter().map(|b| (b.weight - 0.25).abs()).sum();
        assert!(w90 < 1e-12);
        let w60 = bell_single(FRAC_PI_3);
        assert!((w60[0].weight - 0.125).abs() < 1e-12);
        assert!((w60[1].weight - 0.375).abs() < 1e-12);
        assert!((w60[2].weight - 0.375).abs() < 1e-12);
        assert!((w60[3].weight - 0.125).abs() < 1e-12);
    }

    #[test]
    fn weights_sum_to_one_for_all_angles() {
        for i in 0..=32 {
            let theta = PI * i as f64 / 32.0;
            let total: f64 = bell_single(theta).iter().map(|b| b.weight).sum();
            assert!((total - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn momenta_flip_with_outcomes_and_positions_hit_collisions() {
        let (q, w) = (3.0, 2.0);
        for branch in bell_single_with(0.7, q, w) {
            // Means at collision points at t_c = m·w/q (m cancels).
            let t_c_over_m = w / q;
            let collision = [2.0 * w, -2.0 * w, 2.0 * w, -2.0 * w];
            for p in 0..4 {
                let mean = branch.momenta[p] * t_c_over_m + branch.x_in[p];
                assert!((mean - collision[p]).abs() < 1e-12);
            }
            // u outcomes reflect, d outcomes pass through.
            assert_eq!(branch.momenta[0] == -q, branch.e0 == Outcome::U);
            assert_eq!(branch.momenta[3] == -q, branch.e1 == Outcome::U);
        }
    }

    #[test]
    fn ensemble_is_exact_at_the_poles() {
        for (theta, expected) in [(0.0, -1.0), (PI, 1.0)] {
            let out = bell_ensemble(&BellConfig {
                theta,
                q: 1.0,
                w: 1.0,
                d: 1.0,
                m: 1.0,
                replicas: 500,
                seed: 11,
            })
            .unwrap();
            assert_eq!(out.correlation, expected);
            assert_eq!(out.std_error, 0.0);
        }
    }

    #[test]
    fn ensemble_tracks_minus_cos_theta() {
        for (seed, theta) in [(1u64, FRAC_PI_2), (2, PI / 4.0), (3, 2.0)] {
            let out = bell_ensemble(&BellConfig {
                theta,
                q: 1.0,
                w: 1.0,
                d: 1.0,
                m: 1.0,
                replicas: 10_000,
                seed,
            })
            .unwrap();
            assert!(
                (out.correlation - out.expected).abs() < 3.0 * out.std_error.max(0.01),
                "theta={theta}: corr {} vs {}",
                out.correlation,
                out.expected
            );
        }
    }

    #[test]
    fn exhaustive_enumeration_matches_closed_form() {
        for theta in [0.3, FRAC_PI_2, 2.4] {
            for n in [1usize, 3, 6] {
                let e = exhaustive_expected_correlation(theta, n).unwrap();
                assert!((e - (-theta.cos())).abs() < 1e-12, "theta={theta} n={n}");
            }
        }
    }

    #[test]
    fn state_check_reproduces_weights_exactly() {
        for i in 0..=16 {
            let theta = PI * i as f64 / 16.0;
            let report = bell_state_check(theta).unwrap();
            assert!(report.max_weight_deviation < 1e-12, "theta={theta}");
            assert!(report.norm_defect < 1e-12);
            assert!(report.reassembly_defect < 1e-12);
            assert!(report.orthogonality_defect < 1e-12);
            assert!(report.rotation_invariance_deviation < 1e-12);
        }
    }

    #[test]
    fn state_check_poles_kill_agreeing_branches() {
        let r = bell_state_check(0.0).unwrap();
        assert!(r.weights[0].abs() < 1e-15 && r.weights[3].abs() < 1e-15);
    }
}
