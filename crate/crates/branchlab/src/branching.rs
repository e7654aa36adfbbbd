//! Branch decompositions of a state vector: the Q functional (weighted mean
//! branch complexity minus `b` times the branch-weight entropy), the split
//! condition, a recursive two-way search for the Q-minimizing orthogonal
//! decomposition, late-time branching with pullback, and Born-weight
//! sampling.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::complexity::optimize::{complexity_of_state, OptimizerConfig};
use crate::complexity::schmidt::product_distance_bound;
use crate::error::{Error, Result};
use crate::fock::StateVector;
use crate::linalg::{apply_expi, hermitian_eigen, CMat};

/// How branch complexities are evaluated during the search.
#[derive(Debug, Clone)]
pub enum BranchOracle {
    /// Analytic Schmidt-angle surrogate (two-particle chains): a valid
    /// lower-bound-flavored estimate that vanishes on product states.
    SchmidtAngle,
    /// Budget-limited feasible-trajectory estimate (upper flavor).
    Constructive(OptimizerConfig),
    /// Full product-search optimizer.
    Optimizer(OptimizerConfig),
}

impl BranchOracle {
    pub fn complexity(&self, psi: &StateVector) -> Result<f64> {
        let psi = psi.normalized();
        match self {
            BranchOracle::SchmidtAngle => {
                if psi.is_certified_product() {
                    return Ok(0.0);
                }
                product_distance_bound(&psi)
            }
            BranchOracle::Constructive(cfg) => {
                let mut small = cfg.clone();
                small.restarts = small.restarts.min(1);
                small.rounds = small.rounds.min(3);
                small.iters_per_round = small.iters_per_round.min(80);
                Ok(complexity_of_state(&psi, &small)?.upper)
            }
            BranchOracle::Optimizer(cfg) => Ok(complexity_of_state(&psi, cfg)?.upper),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            BranchOracle::SchmidtAngle => "schmidt-angle",
            BranchOracle::Constructive(_) => "constructive",
            BranchOracle::Optimizer(_) => "optimizer",
        }
    }
}

/// One branch: an unnormalized component with its weight and the
/// complexity of its normalized direction.
#[derive(Debug, Clone)]
pub struct Branch {
    pub state: StateVector,
    pub weight: f64,
    pub complexity: f64,
}

/// An orthogonal decomposition of a normalized parent state.
#[derive(Debug, Clone)]
pub struct BranchDecomposition {
    pub branches: Vec<Branch>,
    pub threshold_b: f64,
    pub oracle: String,
    /// Complexity saving of each accepted split, in acceptance order.
    pub split_savings: Vec<f64>,
}

impl BranchDecomposition {
    /// Weighted mean branch complexity `Σ w_i C_i`.
    pub fn mean_complexity(&self) -> f64 {
        self.branches.iter().map(|b| b.weight * b.complexity).sum()
    }

    /// Entropy term `-b Σ w_i ln w_i` (nonnegative; `0·ln 0 = 0`).
    pub fn entropy_term(&self) -> f64 {
        -self.threshold_b
            * self
                .branches
                .iter()
                .map(|b| {
                    if b.weight > 0.0 {
                        b.weight * b.weight.ln()
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.weight).collect()
    }

    /// Check the defining invariants against the parent state.
    pub fn validate_against(&self, parent: &StateVector) -> Result<()> {
        let mut sum = StateVector::zero(parent.sector().clone());
        for b in &self.branches {
            sum = sum.add(&b.state);
        }
        let defect = sum.sub(parent).norm();
        if defect > 1e-9 {
            return Err(Error::non_converged(format!(
                "branches do not reassemble the parent (defect {defect:.2e})"
            )));
        }
        for (i, a) in self.branches.iter().enumerate() {
            if (a.state.norm().powi(2) - a.weight).abs() > 1e-9 {
                return Err(Error::non_converged(
                    "stored weight drifted from ⟨ψ|ψ⟩",
                ));
            }
            for b in &self.branches[i + 1..] {
                if a.state.inner(&b.state).norm() > 1e-9 {
                    return Err(Error::non_converged("branches are not orthogonal"));
                }
            }
        }
        let total: f64 = self.weights().iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::non_converged(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(())
    }
}

/// `Q = Σ w_i C_i - b Σ w_i ln w_i`.
pub fn q_value(decomp: &BranchDecomposition) -> f64 {
    decomp.mean_complexity() + decomp.entropy_term()
}

/// Outcome of the two-way split test.
#[derive(Debug, Clone, Copy)]
pub struct SplitGain {
    /// Complexity saving `C - ρC⁰ - (1-ρ)C¹`.
    pub gain: f64,
    /// Entropy threshold `-bρ ln ρ - b(1-ρ) ln(1-ρ)`.
    pub threshold: f64,
    /// Whether the split strictly lowers Q.
    pub splits: bool,
}

/// Evaluate the split condition for a branch of complexity `parent_c`
/// dividing into parts with complexities `child_cs` and weight fraction
/// `rho` on the first part.
pub fn split_gain(parent_c: f64, child_cs: (f64, f64), rho: f64, b: f64) -> SplitGain {
    assert!(rho > 0.0 && rho < 1.0, "weight fraction must be interior");
    let gain = parent_c - rho * child_cs.0 - (1.0 - rho) * child_cs.1;
    let threshold = -b * rho * rho.ln() - b * (1.0 - rho) * (1.0 - rho).ln();
    SplitGain {
        gain,
        threshold,
        splits: gain > threshold,
    }
}

/// Settings for the branch search.
///
/// `min_child_fraction` keeps the search on macroscopic splits: a candidate
/// is considered only when each child carries at least this weight fraction
/// of its parent. Without it the Q functional is sliver-unstable — splitting
/// off an ε-weight rotation of the branch saves complexity linearly in ε
/// while the entropy price is only ε²·ln(1/ε), so arbitrarily small slivers
/// would be accepted at any threshold `b` and the minimum would degenerate.
#[derive(Debug, Clone)]
pub struct BranchSearchConfig {
    pub seed: u64,
    pub max_branches: usize,
    /// Amplitudes below this (squared, relative) are treated as empty.
    pub weight_floor: f64,
    /// Smallest admissible child weight fraction of an accepted split.
    pub min_child_fraction: f64,
    /// Rotation grid for two-dimensional branch supports.
    pub rotation_angles: usize,
    pub rotation_phases: usize,
}

impl Default for BranchSearchConfig {
    fn default() -> Self {
        BranchSearchConfig {
            seed: 0,
            max_branches: 16,
            weight_floor: 1e-12,
            min_child_fraction: 0.1,
            rotation_angles: 15,
            rotation_phases: 8,
        }
    }
}

/// A candidate two-way split of one branch.
struct SplitCandidate {
    child0: StateVector,
    child1: StateVector,
}

/// Structured split candidates: particle-count projectors per cut, per-site
/// occupancy classes, per-mode occupancy, global spin-up count, and (for
/// two-dimensional supports) a grid of two-dimensional rotations.
fn candidate_splits(branch: &StateVector, cfg: &BranchSearchConfig) -> Vec<SplitCandidate> {
    let sector = branch.sector().clone();
    let geometry = sector.geometry().clone();
    let dim = sector.dim();
    let floor = cfg.weight_floor * branch.norm().powi(2);

    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut push_partition = |mask: Vec<bool>| {
        // Child 0 takes the masked amplitudes; skip empty or full splits.
        let mut a0 = branch.amplitudes().clone();
        let mut a1 = branch.amplitudes().clone();
        let mut n0 = 0.0;
        let mut n1 = 0.0;
        let mut key = Vec::new();
        for i in 0..dim {
            if mask[i] {
                a1[i] = C64::new(0.0, 0.0);
                n0 += a0[i].norm_sqr();
                if a0[i].norm_sqr() > floor {
                    key.push(i);
                }
            } else {
                a0[i] = C64::new(0.0, 0.0);
                n1 += a1[i].norm_sqr();
            }
        }
        if n0 <= floor || n1 <= floor || key.is_empty() {
            return;
        }
        if !seen.insert(key) {
            return;
        }
        out.push(SplitCandidate {
            child0: StateVector::from_amplitudes(sector.clone(), a0),
            child1: StateVector::from_amplitudes(sector.clone(), a1),
        });
    };

    let states = sector.states();
    // (a) number-sector and support projectors.
    if geometry.is_chain() {
        for cut in 0..geometry.num_sites() - 1 {
            let counts: Vec<u32> = states
                .iter()
                .map(|s| (0..=cut).map(|x| s.count_at(x)).sum::<u32>())
                .collect();
            for m in 0..=sector.particle_number() {
                push_partition(counts.iter().map(|&c| c == m).collect());
            }
        }
    }
    for site in 0..geometry.num_sites() {
        for v in 0..=2u32 {
            push_partition(states.iter().map(|s| s.count_at(site) == v).collect());
        }
    }
    for mode in 0..geometry.num_modes() {
        push_partition(states.iter().map(|s| s.mode_occupied(mode)).collect());
    }
    for m in 0..=sector.particle_number() {
        push_partition(
            states
                .iter()
                .map(|s| {
                    (0..geometry.num_sites())
                        .map(|x| {
                            u32::from(s.mode_occupied(geometry.mode(x, crate::fock::Spin::Up)))
                        })
                        .sum::<u32>()
                        == m
                })
                .collect(),
        );
    }

    // (b) two-dimensional rotations within the branch support.
    let support: Vec<usize> = (0..dim)
        .filter(|&i| branch.amplitudes()[i].norm_sqr() > floor)
        .collect();
    if support.len() == 2 {
        let (i0, i1) = (support[0], support[1]);
        for ai in 1..cfg.rotation_angles {
            let phi = std::f64::consts::FRAC_PI_2 * ai as f64 / cfg.rotation_angles as f64;
            for di in 0..cfg.rotation_phases {
                let delta = std::f64::consts::TAU * di as f64 / cfg.rotation_phases as f64;
                let mut v = crate::linalg::CVec::zeros(dim);
                v[i0] = C64::new(phi.cos(), 0.0);
                v[i1] = C64::from_polar(phi.sin(), delta);
                let overlap = v.dotc(branch.amplitudes());
                let a0 = &v * overlap;
                let a1 = branch.amplitudes() - &a0;
                let n0: f64 = a0.norm_squared();
                let n1: f64 = a1.norm_squared();
                if n0 <= floor || n1 <= floor {
                    continue;
                }
                out.push(SplitCandidate {
                    child0: StateVector::from_amplitudes(sector.clone(), a0),
                    child1: StateVector::from_amplitudes(sector.clone(), a1),
                });
            }
        }
    }
    out
}

/// Shared accept-and-recurse loop over a candidate generator.
fn split_recursively(
    psi: &StateVector,
    b: f64,
    oracle: &BranchOracle,
    max_branches: usize,
    min_child_fraction: f64,
    mut candidates_for: impl FnMut(&StateVector) -> Vec<SplitCandidate>,
) -> Result<(Vec<Branch>, Vec<f64>)> {
    let mut branches: Vec<Branch> = vec![Branch {
        state: psi.clone(),
        weight: 1.0,
        complexity: oracle.complexity(psi)?,
    }];
    let mut savings = Vec::new();
    let mut active: Vec<usize> = vec![0];
    while let Some(idx) = active.pop() {
        if branches.len() >= max_branches {
            break;
        }
        let parent = branches[idx].clone();
        let mut best: Option<(f64, SplitCandidate, f64, f64, f64)> = None;
        for cand in candidates_for(&parent.state) {
            let w0 = cand.child0.norm().powi(2);
            let w1 = cand.child1.norm().powi(2);
            let rho = w0 / (w0 + w1);
            if !(rho >= min_child_fraction && rho <= 1.0 - min_child_fraction) {
                continue;
            }
            let c0 = oracle.complexity(&cand.child0)?;
            let c1 = oracle.complexity(&cand.child1)?;
            let sg = split_gain(parent.complexity, (c0, c1), rho, b);
            if sg.splits {
                let score = sg.gain - sg.threshold;
                if best.as_ref().map_or(true, |(s, ..)| score > *s) {
                    best = Some((score, cand, c0, c1, sg.gain));
                }
            }
        }
        if let Some((score, cand, c0, c1, gain)) = best {
            debug_assert!(score > 0.0, "accepted split must strictly lower Q");
            savings.push(gain);
            let w0 = cand.child0.norm().powi(2);
            let w1 = cand.child1.norm().powi(2);
            let scale = parent.weight / (w0 + w1);
            branches[idx] = Branch {
                state: cand.child0,
                weight: w0 * scale,
                complexity: c0,
            };
            branches.push(Branch {
                state: cand.child1,
                weight: w1 * scale,
                complexity: c1,
            });
            active.push(idx);
            active.push(branches.len() - 1);
        }
    }
    Ok((branches, savings))
}

fn finish_decomposition(
    psi: &StateVector,
    b: f64,
    oracle: &BranchOracle,
    mut branches: Vec<Branch>,
    savings: Vec<f64>,
    merge_retest: bool,
) -> Result<BranchDecomposition> {
    // Merge re-test: a pair merges when the split condition fails in
    // reverse (the split no longer pays for its entropy).
    if merge_retest {
        let mut merged_any = true;
        while merged_any && branches.len() > 1 {
            merged_any = false;
            'pairs: for i in 0..branches.len() {
                for j in i + 1..branches.len() {
                    let (wi, wj) = (branches[i].weight, branches[j].weight);
                    let rho = wi / (wi + wj);
                    if !(rho > 0.0 && rho < 1.0) {
                        continue;
                    }
                    let merged_state = branches[i].state.add(&branches[j].state);
                    let cm = oracle.complexity(&merged_state)?;
                    let sg = split_gain(
                        cm,
                        (branches[i].complexity, branches[j].complexity),
                        rho,
                        b,
                    );
                    if !sg.splits {
                        let weight = wi + wj;
                        branches[i] = Branch {
                            state: merged_state,
                            weight,
                            complexity: cm,
                        };
                        branches.remove(j);
                        merged_any = true;
                        break 'pairs;
                    }
                }
            }
        }
    }
    // Deterministic presentation: heaviest branch first, support order as
    // the tie-break.
    branches.sort_by(|a, b| {
        b.weight
            .partial_cmp(&a.weight)
            .unwrap()
            .then_with(|| support_key(&a.state).cmp(&support_key(&b.state)))
    });
    let decomp = BranchDecomposition {
        branches,
        threshold_b: b,
        oracle: oracle.label().to_string(),
        split_savings: savings,
    };
    decomp.validate_against(psi)?;
    Ok(decomp)
}

/// Search for the Q-minimizing orthogonal decomposition by recursive
/// two-way splitting from structured candidates, followed by a merge
/// re-test pass. Deterministic for a fixed seed and configuration.
pub fn optimize_branches(
    psi: &StateVector,
    b: f64,
    oracle: &BranchOracle,
    cfg: &BranchSearchConfig,
) -> Result<BranchDecomposition> {
    if b <= 0.0 {
        return Err(Error::domain("branching threshold must be positive"));
    }
    if (psi.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::domain("parent state must be normalized"));
    }
    let (branches, savings) = split_recursively(
        psi,
        b,
        oracle,
        cfg.max_branches,
        cfg.min_child_fraction,
        |s| candidate_splits(s, cfg),
    )?;
    finish_decomposition(psi, b, oracle, branches, savings, true)
}

fn support_key(state: &StateVector) -> Vec<usize> {
    let floor = 1e-12 * state.norm().powi(2);
    (0..state.sector().dim())
        .filter(|&i| state.amplitudes()[i].norm_sqr() > floor)
        .collect()
}

/// Exhaustive two-way validation search for branches with small support:
/// every bipartition of the support basis set plus a finer rotation grid.
/// Validates [`optimize_branches`] on desk-size states.
pub fn exhaustive_branch_search(
    psi: &StateVector,
    b: f64,
    oracle: &BranchOracle,
) -> Result<BranchDecomposition> {
    if support_key(psi).len() > 8 {
        return Err(Error::cap(format!(
            "exhaustive search limited to support ≤ 8 (got {})",
            support_key(psi).len()
        )));
    }
    let fine = BranchSearchConfig {
        rotation_angles: 48,
        rotation_phases: 24,
        ..BranchSearchConfig::default()
    };
    let sector = psi.sector().clone();
    let dim = sector.dim();
    let min_frac = BranchSearchConfig::default().min_child_fraction;
    let (branches, savings) = split_recursively(psi, b, oracle, 64, min_frac, |state| {
        let mut candidates = candidate_splits(state, &fine);
        let psupport = support_key(state);
        if psupport.len() > 2 {
            for bits in 1..(1u32 << (psupport.len() - 1)) {
                let mut a0 = state.amplitudes().clone();
                let mut a1 = state.amplitudes().clone();
                for (pos, &i) in psupport.iter().enumerate() {
                    if bits >> pos & 1 == 1 {
                        a1[i] = C64::new(0.0, 0.0);
                    } else {
                        a0[i] = C64::new(0.0, 0.0);
                    }
                }
                for i in 0..dim {
                    if !psupport.contains(&i) {
                        a0[i] = C64::new(0.0, 0.0);
                    }
                }
                if a0.norm_squared() > 1e-12 && a1.norm_squared() > 1e-12 {
                    candidates.push(SplitCandidate {
                        child0: StateVector::from_amplitudes(sector.clone(), a0),
                        child1: StateVector::from_amplitudes(sector.clone(), a1),
                    });
                }
            }
        }
        candidates
    })?;
    finish_decomposition(psi, b, oracle, branches, savings, false)
}

/// One late-time branching snapshot.
#[derive(Debug)]
pub struct BranchSnapshot {
    pub t_out: f64,
    pub decomposition: BranchDecomposition,
    /// Branches translated back to `t_in` by the inverse evolution.
    pub pulled_back: Vec<StateVector>,
}

/// Late-time branching history across a schedule of candidate times.
#[derive(Debug)]
pub struct BranchHistory {
    pub snapshots: Vec<BranchSnapshot>,
    pub stabilized: bool,
    /// Index of the first snapshot of the stable pair, when stabilized.
    pub stable_from: Option<usize>,
}

impl BranchHistory {
    /// The stabilized pulled-back ensemble (the late-time surrogate).
    pub fn ensemble(&self) -> Option<&[StateVector]> {
        self.stable_from
            .map(|i| self.snapshots[i + 1].pulled_back.as_slice())
    }
}

/// Decompose `exp(-i (t_out - t_in) H) ψ_in` at each scheduled `t_out`,
/// translate the branches back to `t_in`, and declare stabilization when
/// branch count, weights, and pairwise pulled-back overlaps stop changing
/// (tolerance 1e-6) across consecutive schedule points.
pub fn late_time_branch(
    psi_in: &StateVector,
    hamiltonian: &CMat,
    t_in: f64,
    schedule: &[f64],
    b: f64,
    oracle: &BranchOracle,
    cfg: &BranchSearchConfig,
) -> Result<BranchHistory> {
    if schedule.is_empty() {
        return Err(Error::domain("empty t_out schedule"));
    }
    if schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("t_out schedule must be increasing"));
    }
    if crate::linalg::hermiticity_defect(hamiltonian) > 1e-9 {
        return Err(Error::domain("Hamiltonian must be Hermitian"));
    }
    let sector = psi_in.sector().clone();
    let (vals, vecs) = hermitian_eigen(hamiltonian);
    let mut snapshots = Vec::new();
    for &t_out in schedule {
        let dt = t_out - t_in;
        let out_amps = apply_expi(&vals, &vecs, dt, psi_in.amplitudes());
        let psi_out = StateVector::from_amplitudes(sector.clone(), out_amps).normalized();
        let decomposition = optimize_branches(&psi_out, b, oracle, cfg)?;
        let pulled_back = decomposition
            .branches
            .iter()
            .map(|br| {
                let amps = apply_expi(&vals, &vecs, -dt, br.state.amplitudes());
                StateVector::from_amplitudes(sector.clone(), amps)
            })
            .collect();
        snapshots.push(BranchSnapshot {
            t_out,
            decomposition,
            pulled_back,
        });
    }
    let mut stable_from = None;
    for i in 0..snapshots.len() - 1 {
        if snapshots_match(&snapshots[i], &snapshots[i + 1]) {
            stable_from = Some(i);
            break;
        }
    }
    Ok(BranchHistory {
        stabilized: stable_from.is_some(),
        stable_from,
        snapshots,
    })
}

fn snapshots_match(a: &BranchSnapshot, b: &BranchSnapshot) -> bool {
    let (da, db) = (&a.decomposition, &b.decomposition);
    if da.branches.len() != db.branches.len() {
        return false;
    }
    // Branches are sorted deterministically; compare in order.
    for (ba, bb) in da.branches.iter().zip(db.branches.iter()) {
        if (ba.weight - bb.weight).abs() > 1e-6 {
            return false;
        }
    }
    for (pa, pb) in a.pulled_back.iter().zip(b.pulled_back.iter()) {
        let na = pa.norm();
        let nb = pb.norm();
        if na == 0.0 || nb == 0.0 {
            return false;
        }
        if (pa.inner(pb).norm() / (na * nb) - 1.0).abs() > 1e-6 {
            return false;
        }
    }
    true
}

/// Draw a branch index with probability proportional to its weight.
///
/// Weights off unity by more than 1e-6 are renormalized and flagged in the
/// second return slot. Reproducible per seed.
pub fn sample_branch(decomp: &BranchDecomposition, seed: u64) -> (usize, bool) {
    let weights = decomp.weights();
    let total: f64 = weights.iter().sum();
    let renormalized = (total - 1.0).abs() > 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: f64 = rng.gen_range(0.0..1.0) * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return (i, renormalized);
        }
    }
    (weights.len() - 1, renormalized)
}
