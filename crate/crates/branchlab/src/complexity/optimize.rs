//! Numerical minimization of trajectory cost between fixed endpoints, and
//! the outer search over product start states.
//!
//! The minimizer is GRAPE-style: a fixed number of piecewise-constant steps,
//! each parametrized by real coefficients over the orthonormal control
//! basis (so the step norm is just the coefficient norm), optimized by Adam
//! under an augmented-Lagrangian endpoint constraint `|⟨target|U|start⟩| = 1`.
//! Exact propagator derivatives come from the eigendecomposition of each
//! step generator (divided-difference form), so gradients are accurate at
//! any step size.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{
    apply_packet_creation, vacuum_state, LatticeGeometry, Packet, SectorBasis, Spin, StateVector,
};
use crate::linalg::{hermitian_eigen, CMat, CVec};
use crate::opspace::{basis_f, basis_g, embed_local_sparse, ControlField, LocalOperator, Support};

use super::schmidt::{endpoint_angle_bound, product_distance_bound};
use super::{ComplexityEstimate, ControlTrajectory};

/// Settings for the trajectory optimizer.
#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    /// Piecewise-constant step count; default `4·(sites-1)`.
    pub steps: Option<usize>,
    /// Independent random restarts.
    pub restarts: usize,
    pub seed: u64,
    /// Largest admissible sector dimension.
    pub sector_cap: usize,
    /// Augmented-Lagrangian rounds.
    pub rounds: usize,
    /// Adam iterations per round.
    pub iters_per_round: usize,
    /// Endpoint tolerance on `1 - |⟨target|U|start⟩|`.
    pub feas_tol: f64,
    /// Known feasible schedules used both as candidate answers and as
    /// refinement starting points.
    pub warm_starts: Vec<ControlTrajectory>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            steps: None,
            restarts: 8,
            seed: 0,
            sector_cap: 512,
            rounds: 7,
            iters_per_round: 220,
            feas_tol: 1e-9,
            warm_starts: Vec::new(),
        }
    }
}

/// The orthonormal control basis of a lattice with its sector embeddings.
struct ControlBasis {
    geometry: LatticeGeometry,
    ops: Vec<LocalOperator>,
    sparse: Vec<Vec<(usize, usize, C64)>>,
    dim: usize,
}

impl ControlBasis {
    fn new(geometry: &LatticeGeometry, sector: &Arc<SectorBasis>) -> ControlBasis {
        let mut ops = Vec::new();
        for site in 0..geometry.num_sites() {
            ops.extend(basis_f(site));
        }
        for (x, y) in geometry.neighbor_pairs() {
            ops.extend(basis_g(geometry, x, y).expect("neighbor pairs are valid"));
        }
        let sparse = ops.iter().map(|op| embed_local_sparse(op, sector)).collect();
        let dim = ops.len();
        ControlBasis {
            geometry: geometry.clone(),
            ops,
            sparse,
            dim,
        }
    }

    /// Reassemble a control field from one step's coefficient block.
    fn field(&self, coeffs: &[f64]) -> ControlField {
        let mut site_mats: std::collections::BTreeMap<usize, CMat> = Default::default();
        let mut pair_mats: std::collections::BTreeMap<(usize, usize), CMat> = Default::default();
        for (op, &c) in self.ops.iter().zip(coeffs) {
            if c == 0.0 {
                continue;
            }
            match op.support {
                Support::Site(x) => {
                    site_mats
                        .entry(x)
                        .and_modify(|m| *m += &op.matrix * C64::new(c, 0.0))
                        .or_insert_with(|| &op.matrix * C64::new(c, 0.0));
                }
                Support::Pair(x, y) => {
                    pair_mats
                        .entry((x, y))
                        .and_modify(|m| *m += &op.matrix * C64::new(c, 0.0))
                        .or_insert_with(|| &op.matrix * C64::new(c, 0.0));
                }
            }
        }
        let mut field = ControlField::zero(&self.geometry);
        for (x, m) in site_mats {
            field.set_f(x, m).expect("basis combinations validate");
        }
        for ((x, y), m) in pair_mats {
            field.set_g(x, y, m).expect("basis combinations validate");
        }
        field
    }

    /// Coefficients of a control field (exact when the field is in span).
    fn coefficients(&self, field: &ControlField) -> Vec<f64> {
        self.ops
            .iter()
            .map(|op| match op.support {
                Support::Site(x) => field
                    .f_terms()
                    .get(&x)
                    .map(|m| 4.0 * re_trace_product(&op.matrix, m))
                    .unwrap_or(0.0),
                Support::Pair(x, y) => field
                    .g_terms()
                    .get(&(x, y))
                    .map(|m| re_trace_product(&op.matrix, m))
                    .unwrap_or(0.0),
            })
            .collect()
    }
}

fn re_trace_product(a: &CMat, b: &CMat) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc.re
}

/// One optimization run over fixed durations.
struct TrajectoryProblem<'a> {
    basis: &'a ControlBasis,
    durations: Vec<f64>,
    start: CVec,
    target: CVec,
    d: usize,
}

struct Evaluation {
    /// `1 - |z|²` feasibility violation.
    violation: f64,
    /// True (unsmoothed) cost `Σ Δt ‖c_j‖`.
    cost: f64,
    /// Gradient of `Σ Δt softnorm(c_j) + weight · (1 - |z|²)`; the cost
    /// part is dropped when `cost_weight` is zero.
    grad: Vec<f64>,
}

impl TrajectoryProblem<'_> {
    fn steps(&self) -> usize {
        self.durations.len()
    }

    fn step_generator(&self, coeffs: &[f64]) -> CMat {
        let mut k = CMat::zeros(self.d, self.d);
        for (entries, &c) in self.basis.sparse.iter().zip(coeffs) {
            if c == 0.0 {
                continue;
            }
            let cc = C64::new(c, 0.0);
            for &(i, j, v) in entries {
                k[(i, j)] += v * cc;
            }
        }
        k
    }

    /// Objective value and gradient at `coeffs` (flattened step-major):
    /// `cost_weight · Σ Δt softnorm_eps(c_j) + weight · (1 - |z|²)`.
    fn evaluate(&self, coeffs: &[f64], eps: f64, weight: f64, cost_weight: f64) -> Evaluation {
        let s = self.steps();
        let b = self.basis.dim;
        // Forward sweep: eigendecompositions and states.
        let mut eigs = Vec::with_capacity(s);
        let mut forward = Vec::with_capacity(s + 1);
        forward.push(self.start.clone());
        for j in 0..s {
            let k = self.step_generator(&coeffs[j * b..(j + 1) * b]);
            let (vals, vecs) = hermitian_eigen(&k);
            let prev = forward.last().expect("nonempty");
            let next = crate::linalg::apply_expi(&vals, &vecs, self.durations[j], prev);
            forward.push(next);
            eigs.push((vals, vecs));
        }
        // Backward sweep: w_j = (U_S … U_{j+1})† target, so w_s = target.
        let mut backward = vec![self.target.clone(); s + 1];
        for j in (0..s).rev() {
            let (vals, vecs) = &eigs[j];
            backward[j] =
                crate::linalg::apply_expi(vals, vecs, -self.durations[j], &backward[j + 1]);
        }
        let z = backward[s].dotc(&forward[s]);
        let violation = 1.0 - z.norm_sqr();

        let mut grad = vec![0.0; s * b];
        for j in 0..s {
            let block = &coeffs[j * b..(j + 1) * b];
            if cost_weight != 0.0 {
                let norm_sq: f64 = block.iter().map(|c| c * c).sum();
                let soft = (norm_sq + eps * eps).sqrt();
                for (alpha, &c) in block.iter().enumerate() {
                    grad[j * b + alpha] += cost_weight * self.durations[j] * c / soft;
                }
            }
            if weight == 0.0 {
                continue;
            }
            // Constraint part via the divided-difference derivative of the
            // step propagator: dz(B) = Tr(B · V Tᵀ V†).
            let (vals, vecs) = &eigs[j];
            let tau = self.durations[j];
            let vhat = vecs.adjoint() * &forward[j];
            let what = vecs.adjoint() * &backward[j + 1];
            let phases: Vec<C64> = vals.iter().map(|&l| C64::from_polar(1.0, -tau * l)).collect();
            let mut t = CMat::zeros(self.d, self.d);
            for a_i in 0..self.d {
                for b_i in 0..self.d {
                    let (la, lb) = (vals[a_i], vals[b_i]);
                    let gamma = if (la - lb).abs() > 1e-12 * (1.0 + la.abs() + lb.abs()) {
                        (phases[a_i] - phases[b_i]) / C64::new(la - lb, 0.0)
                    } else {
                        C64::new(0.0, -tau) * phases[a_i]
                    };
                    t[(a_i, b_i)] = gamma * what[a_i].conj() * vhat[b_i];
                }
            }
            let g_mat = vecs * t.transpose() * vecs.adjoint();
            for (alpha, entries) in self.basis.sparse.iter().enumerate() {
                let mut dz = C64::new(0.0, 0.0);
                for &(r, c, v) in entries {
                    dz += v * g_mat[(c, r)];
                }
                // d(1-|z|²) = -2 Re(z̄ dz)
                grad[j * b + alpha] += weight * (-2.0) * (z.conj() * dz).re;
            }
        }
        let cost: f64 = (0..s)
            .map(|j| {
                let block = &coeffs[j * b..(j + 1) * b];
                self.durations[j] * block.iter().map(|c| c * c).sum::<f64>().sqrt()
            })
            .sum();
        Evaluation {
            violation,
            cost,
            grad,
        }
    }

    /// Augmented-Lagrangian refinement from an initial coefficient vector.
    /// Returns the cheapest feasible snapshot encountered.
    fn refine(&self, mut coeffs: Vec<f64>, cfg: &OptimizerConfig) -> Option<(f64, Vec<f64>)> {
        let v_tol = 1.0 - (1.0 - cfg.feas_tol) * (1.0 - cfg.feas_tol);
        let n = coeffs.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        let track = |eval: &Evaluation, coeffs: &[f64], best: &mut Option<(f64, Vec<f64>)>| {
            if eval.violation <= v_tol
                && best.as_ref().map_or(true, |(c, _)| eval.cost < *c)
            {
                *best = Some((eval.cost, coeffs.to_vec()));
            }
        };
        let mut lambda = 0.0f64;
        let mut mu = 16.0f64;
        let mut eps = 1e-2f64;
        let mut prev_violation = f64::INFINITY;
        for round in 0..cfg.rounds {
            let lr = 0.06 / (1.0 + round as f64);
            let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
            let mut last_violation = prev_violation;
            for it in 0..cfg.iters_per_round {
                let eval = self.evaluate(&coeffs, eps, lambda + mu, 1.0);
                track(&eval, &coeffs, &mut best);
                last_violation = eval.violation;
                let t = it as f64 + 1.0;
                for i in 0..n {
                    m[i] = 0.9 * m[i] + 0.1 * eval.grad[i];
                    v[i] = 0.999 * v[i] + 0.001 * eval.grad[i] * eval.grad[i];
                    let mhat = m[i] / (1.0 - 0.9f64.powf(t));
                    let vhat = v[i] / (1.0 - 0.999f64.powf(t));
                    coeffs[i] -= lr * mhat / (vhat.sqrt() + 1e-8);
                }
            }
            lambda += mu * last_violation;
            if last_violation > 0.25 * prev_violation {
                mu *= 5.0;
            }
            prev_violation = last_violation;
            eps = (eps * 0.1).max(1e-9);
        }
        // Feasibility polish: drive the endpoint home, cost ignored.
        let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
        for it in 0..600 {
            let eval = self.evaluate(&coeffs, 1e-9, 1.0, 0.0);
            track(&eval, &coeffs, &mut best);
            if eval.violation <= v_tol {
                break;
            }
            let t = it as f64 + 1.0;
            for i in 0..n {
                m[i] = 0.9 * m[i] + 0.1 * eval.grad[i];
                v[i] = 0.999 * v[i] + 0.001 * eval.grad[i] * eval.grad[i];
                let mhat = m[i] / (1.0 - 0.9f64.powf(t));
                let vhat = v[i] / (1.0 - 0.999f64.powf(t));
                coeffs[i] -= 0.02 * mhat / (vhat.sqrt() + 1e-8);
            }
        }
        let eval = self.evaluate(&coeffs, 1e-9, 1.0, 0.0);
        track(&eval, &coeffs, &mut best);
        best
    }
}

fn check_endpoints(target: &StateVector, start: &StateVector, cap: usize) -> Result<()> {
    if target.sector().geometry() != start.sector().geometry() {
        return Err(Error::domain("states live on different lattices"));
    }
    if target.sector().particle_number() != start.sector().particle_number() {
        return Err(Error::domain(
            "infeasible: endpoint states carry unequal particle numbers",
        ));
    }
    if target.sector().dim() > cap {
        return Err(Error::cap(format!(
            "sector dimension {} exceeds the optimizer cap {cap}",
            target.sector().dim()
        )));
    }
    Ok(())
}

/// Minimize trajectory cost between two states of equal particle number.
///
/// Candidate schedules come from the provided warm starts (kept verbatim as
/// fallback answers and also refined) plus seeded random restarts. The
/// reported `upper` is the cost of the cheapest schedule whose endpoint
/// overlap reaches `1 - feas_tol`; `lower` is the endpoint Schmidt-angle
/// bound (two-particle chains) adjusted for the same endpoint slack.
/// Deterministic for a fixed seed.
pub fn optimize_complexity(
    target: &StateVector,
    start: &StateVector,
    cfg: &OptimizerConfig,
) -> Result<ComplexityEstimate> {
    check_endpoints(target, start, cfg.sector_cap)?;
    let start = start.normalized();
    let target = target.normalized();
    if target.overlap(&start) >= 1.0 - cfg.feas_tol {
        return ComplexityEstimate::new(
            0.0,
            0.0,
            ControlTrajectory::empty(),
            vec!["trivial-overlap".into()],
            true,
        );
    }
    let geometry = start.sector().geometry().clone();
    let sector = start.sector().clone();
    let basis = ControlBasis::new(&geometry, &sector);
    let steps = cfg.steps.unwrap_or(4 * (geometry.num_sites() - 1)).max(2);

    let lower = match endpoint_angle_bound(&start, &target) {
        Ok(bound) => {
            let cuts = geometry.num_sites() as f64 - 1.0;
            let slack = (1.0 - cfg.feas_tol).acos() * cuts / super::schmidt::SQRT8;
            (bound - slack).max(0.0)
        }
        Err(_) => 0.0,
    };

    enum Init {
        Warm(usize),
        Random(u64),
    }
    let mut inits = Vec::new();
    for i in 0..cfg.warm_starts.len() {
        inits.push(Init::Warm(i));
    }
    for r in 0..cfg.restarts {
        inits.push(Init::Random(r as u64));
    }

    // Warm starts count as candidate answers as they stand.
    let warm_verbatim: Vec<(f64, ControlTrajectory)> = cfg
        .warm_starts
        .iter()
        .filter_map(|traj| {
            let end = super::evolve(traj, &start);
            (end.overlap(&target) >= 1.0 - cfg.feas_tol).then(|| (traj.cost(), traj.clone()))
        })
        .collect();

    let outcomes: Vec<Option<(f64, Vec<f64>, Vec<f64>)>> = inits
        .par_iter()
        .map(|init| {
            let (coeffs, durations) = match init {
                Init::Warm(i) => {
                    let warm = &cfg.warm_starts[*i];
                    let sub = warm.subdivided((steps / warm.steps().len().max(1)).max(1));
                    let durations: Vec<f64> = sub.steps().iter().map(|s| s.duration).collect();
                    let coeffs: Vec<f64> = sub
                        .steps()
                        .iter()
                        .flat_map(|s| basis.coefficients(&s.field))
                        .collect();
                    (coeffs, durations)
                }
                Init::Random(r) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(1 + r);
                    let scale = if r % 2 == 0 { 0.4 } else { 0.1 };
                    let coeffs: Vec<f64> = (0..steps * basis.dim)
                        .map(|_| scale * rng.gen_range(-1.0..1.0))
                        .collect();
                    (coeffs, vec![1.0 / steps as f64; steps])
                }
            };
            let problem = TrajectoryProblem {
                basis: &basis,
                durations: durations.clone(),
                start: start.amplitudes().clone(),
                target: target.amplitudes().clone(),
                d: sector.dim(),
            };
            problem
                .refine(coeffs, cfg)
                .map(|(cost, coeffs)| (cost, coeffs, durations))
        })
        .collect();

    let mut best: Option<(f64, ControlTrajectory, &'static str)> = None;
    for (cost, traj) in &warm_verbatim {
        if best.as_ref().map_or(true, |(c, _, _)| cost < c) {
            best = Some((*cost, traj.clone(), "warm-start"));
        }
    }
    for outcome in outcomes.into_iter().flatten() {
        let (cost, coeffs, durations) = outcome;
        if best.as_ref().map_or(true, |(c, _, _)| cost < *c) {
            let raw: Vec<(f64, ControlField)> = durations
                .iter()
                .enumerate()
                .map(|(j, &dt)| (dt, basis.field(&coeffs[j * basis.dim..(j + 1) * basis.dim])))
                .collect();
            let traj = ControlTrajectory::new(raw)?;
            best = Some((cost, traj, "grape"));
        }
    }

    match best {
        Some((cost, traj, tag)) => {
            ComplexityEstimate::new(lower.min(cost), cost, traj, vec![tag.into()], true)
        }
        None => Err(Error::non_converged(format!(
            "no schedule reached the endpoint within 1-|overlap| ≤ {}; try more steps or restarts",
            cfg.feas_tol
        ))),
    }
}

// ---------------------------------------------------------------------------
// Product-state search.
// ---------------------------------------------------------------------------

/// Free packet parameters for one particle (unnormalized; the assembled
/// product vector is normalized as a whole).
#[derive(Debug, Clone)]
struct PacketParams {
    pos: Vec<C64>,
    spin: [C64; 2],
}

impl PacketParams {
    fn to_packet(&self) -> Packet {
        Packet {
            position: self.pos.clone(),
            spin: self.spin,
        }
    }

    fn renormalized(&self) -> PacketParams {
        let pn = self.pos.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let sn = (self.spin[0].norm_sqr() + self.spin[1].norm_sqr()).sqrt();
        PacketParams {
            pos: self.pos.iter().map(|z| z / pn).collect(),
            spin: [self.spin[0] / sn, self.spin[1] / sn],
        }
    }
}

/// Raw (unnormalized) product vector from packet parameters.
fn product_vector(geometry: &LatticeGeometry, packets: &[PacketParams]) -> StateVector {
    let mut state = vacuum_state(geometry);
    for p in packets {
        state = apply_packet_creation(&state, &p.to_packet());
    }
    state
}

/// Maximize `|⟨reference|P̂(params)⟩|` over packets by Adam with exact
/// per-mode derivatives (the product vector is linear in each complex
/// parameter). Returns the best parameters and the overlap reached.
fn fit_product(
    reference: &StateVector,
    init: &[PacketParams],
    iters: usize,
) -> (Vec<PacketParams>, f64) {
    let geometry = reference.sector().geometry().clone();
    let sites = geometry.num_sites();
    let mut packets: Vec<PacketParams> = init.iter().map(|p| p.renormalized()).collect();
    let n = packets.len();
    let dim_per = 2 * (2 * sites) + 4; // re/im position + re/im spin
    let total = n * dim_per;
    let (mut madam, mut vadam) = (vec![0.0; total], vec![0.0; total]);
    let mut best = (f64::NEG_INFINITY, packets.clone());
    for it in 0..iters {
        let p_vec = product_vector(&geometry, &packets);
        let norm = p_vec.norm().max(1e-300);
        let z = reference.inner(&p_vec) / C64::new(norm, 0.0);
        if z.norm() > best.0 {
            best = (z.norm(), packets.clone());
        }
        // For each complex parameter c: dP/dc is the product vector with
        // packet j replaced by the corresponding delta packet, and
        //   d|z|²(re c) = -2 Re(z̄ · [⟨ref|D⟩/N - z·Re⟨P̂|D⟩/N]) … assembled
        // below from the two inner products ⟨ref|D⟩ and ⟨P|D⟩.
        let mut grad = vec![0.0; total];
        for j in 0..n {
            let offset = j * dim_per;
            let mut slot = 0usize;
            let put = |delta: &PacketParams, grad: &mut Vec<f64>, slot: &mut usize| {
                let mut modified = packets.clone();
                modified[j] = delta.clone();
                let dstate = product_vector(&geometry, &modified);
                let dz_raw = reference.inner(&dstate);
                let dn_raw = p_vec.inner(&dstate); // ⟨P|D⟩
                let n2 = norm * norm;
                // real part of the parameter
                let dz_re = dz_raw / C64::new(norm, 0.0)
                    - z * C64::new(dn_raw.re / n2, 0.0);
                grad[offset + *slot] = -2.0 * (z.conj() * dz_re).re;
                // imaginary part: D picks up a factor i
                let dz_im = dz_raw * C64::new(0.0, 1.0) / C64::new(norm, 0.0)
                    - z * C64::new(-dn_raw.im / n2, 0.0);
                grad[offset + *slot + 1] = -2.0 * (z.conj() * dz_im).re;
                *slot += 2;
            };
            for x in 0..sites {
                let mut delta = PacketParams {
                    pos: vec![C64::new(0.0, 0.0); sites],
                    spin: packets[j].spin,
                };
                delta.pos[x] = C64::new(1.0, 0.0);
                put(&delta, &mut grad, &mut slot);
            }
            for s in 0..2 {
                let mut delta = PacketParams {
                    pos: packets[j].pos.clone(),
                    spin: [C64::new(0.0, 0.0); 2],
                };
                delta.spin[s] = C64::new(1.0, 0.0);
                put(&delta, &mut grad, &mut slot);
            }
        }
        let t = it as f64 + 1.0;
        let lr = 0.08;
        let mut step = |value: &mut f64, slot: usize| {
            madam[slot] = 0.9 * madam[slot] + 0.1 * grad[slot];
            vadam[slot] = 0.999 * vadam[slot] + 0.001 * grad[slot] * grad[slot];
            let mhat = madam[slot] / (1.0 - 0.9f64.powf(t));
            let vhat = vadam[slot] / (1.0 - 0.999f64.powf(t));
            *value -= lr * mhat / (vhat.sqrt() + 1e-8);
        };
        for j in 0..n {
            let offset = j * dim_per;
            let mut slot = 0usize;
            for x in 0..sites {
                let mut re = packets[j].pos[x].re;
                let mut im = packets[j].pos[x].im;
                step(&mut re, offset + slot);
                step(&mut im, offset + slot + 1);
                packets[j].pos[x] = C64::new(re, im);
                slot += 2;
            }
            for s in 0..2 {
                let mut re = packets[j].spin[s].re;
                let mut im = packets[j].spin[s].im;
                step(&mut re, offset + slot);
                step(&mut im, offset + slot + 1);
                packets[j].spin[s] = C64::new(re, im);
                slot += 2;
            }
        }
        if it % 40 == 39 {
            for p in packets.iter_mut() {
                *p = p.renormalized();
            }
        }
    }
    let normalized: Vec<PacketParams> = best.1.iter().map(|p| p.renormalized()).collect();
    (normalized, best.0)
}

/// Candidate packet sets for the product search: natural orbitals of the
/// one-particle density matrix (rank-1 projected onto position ⊗ spin),
/// packets localized on the dominant basis pattern, an adjacent-pair
/// variant of it, and seeded random sets.
fn candidate_packets(psi: &StateVector, extra_random: usize, seed: u64) -> Vec<Vec<PacketParams>> {
    let geometry = psi.sector().geometry().clone();
    let sites = geometry.num_sites();
    let n = psi.sector().particle_number() as usize;
    let mut candidates = Vec::new();

    // One-particle density matrix ⟨a†_ν a_μ⟩ over modes.
    let modes = geometry.num_modes();
    let mut rho = DMatrix::<C64>::zeros(modes, modes);
    for (i, si) in psi.sector().states().iter().enumerate() {
        if psi.amplitudes()[i].norm_sqr() == 0.0 {
            continue;
        }
        for mu in 0..modes {
            if !si.mode_occupied(mu) {
                continue;
            }
            let removed = crate::fock::FockState(si.0 & !(1 << mu));
            let sign_mu = si.sign_above(mu);
            for nu in 0..modes {
                if removed.mode_occupied(nu) {
                    continue;
                }
                let dst = crate::fock::FockState(removed.0 | 1 << nu);
                if let Some(k) = psi.sector().index_of(dst) {
                    let sign = sign_mu * removed.sign_above(nu);
                    rho[(nu, mu)] +=
                        psi.amplitudes()[k].conj() * psi.amplitudes()[i] * C64::new(sign, 0.0);
                }
            }
        }
    }
    let rho = (rho.clone() + rho.adjoint()) * C64::new(0.5, 0.0);
    let (vals, vecs) = hermitian_eigen(&rho);
    let mut order: Vec<usize> = (0..modes).collect();
    order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap());
    let orbital_packet = |col: usize| -> PacketParams {
        // Rank-1 projection of the mode function onto position ⊗ spin.
        let mut m = DMatrix::<C64>::zeros(sites, 2);
        for x in 0..sites {
            for s in 0..2 {
                m[(x, s)] = vecs[(2 * x + s, col)];
            }
        }
        let svd = m.svd(true, true);
        let u = svd.u.unwrap();
        let vt = svd.v_t.unwrap();
        PacketParams {
            pos: (0..sites).map(|x| u[(x, 0)]).collect(),
            spin: [vt[(0, 0)], vt[(0, 1)]],
        }
        .renormalized()
    };
    candidates.push((0..n).map(|j| orbital_packet(order[j])).collect());

    // Dominant basis pattern, localized, plus an adjacent repacking.
    let (mut best_i, mut best_a) = (0usize, 0.0f64);
    for (i, a) in psi.amplitudes().iter().enumerate() {
        if a.norm_sqr() > best_a {
            best_a = a.norm_sqr();
            best_i = i;
        }
    }
    let pattern = psi.sector().state(best_i);
    let mut localized = Vec::new();
    for x in 0..sites {
        for spin in Spin::BOTH {
            if pattern.mode_occupied(geometry.mode(x, spin)) {
                let p = Packet::localized(&geometry, x, spin);
                localized.push(PacketParams {
                    pos: p.position,
                    spin: p.spin,
                });
            }
        }
    }
    if localized.len() == n {
        let first_site = (0..sites).find(|&x| pattern.count_at(x) > 0).unwrap_or(0);
        let mut adjacent = Vec::new();
        for (j, p) in localized.iter().enumerate() {
            let site = (first_site + j).min(sites - 1);
            let mut moved = PacketParams {
                pos: vec![C64::new(0.0, 0.0); sites],
                spin: p.spin,
            };
            moved.pos[site] = C64::new(1.0, 0.0);
            adjacent.push(moved);
        }
        candidates.push(localized);
        candidates.push(adjacent);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(77);
    for _ in 0..extra_random {
        let set: Vec<PacketParams> = (0..n)
            .map(|_| {
                PacketParams {
                    pos: (0..sites)
                        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                        .collect(),
                    spin: [
                        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    ],
                }
                .renormalized()
            })
            .collect();
        candidates.push(set);
    }
    candidates
}

/// Distance from `psi` to the nearest product state: outer search over
/// parametrized packets, inner trajectory minimization.
///
/// Certified product states return zero immediately. Otherwise packet
/// candidates are fit to the state (a fit reaching the endpoint tolerance
/// certifies zero cost), and each fitted product seeds an inner
/// [`optimize_complexity`] run. Deterministic for a fixed seed.
pub fn complexity_of_state(psi: &StateVector, cfg: &OptimizerConfig) -> Result<ComplexityEstimate> {
    if psi.sector().dim() > cfg.sector_cap {
        return Err(Error::cap(format!(
            "sector dimension {} exceeds the optimizer cap {}",
            psi.sector().dim(),
            cfg.sector_cap
        )));
    }
    let psi = psi.normalized();
    if psi.is_certified_product() {
        return ComplexityEstimate::new(
            0.0,
            0.0,
            ControlTrajectory::empty(),
            vec!["product-certificate".into()],
            true,
        );
    }
    let lower = product_distance_bound(&psi).unwrap_or(0.0);
    let geometry = psi.sector().geometry().clone();
    let candidates = candidate_packets(&psi, cfg.restarts.min(4), cfg.seed);

    // Fit packets to the state itself; a perfect fit is a product state.
    let fits: Vec<(Vec<PacketParams>, f64)> = candidates
        .par_iter()
        .map(|init| fit_product(&psi, init, 260))
        .collect();
    let best_fit = fits
        .iter()
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .expect("at least one candidate");
    if best_fit.1 >= 1.0 - cfg.feas_tol {
        return ComplexityEstimate::new(
            0.0,
            0.0,
            ControlTrajectory::empty(),
            vec!["product-fit".into()],
            true,
        );
    }

    // Inner minimization from each distinct fitted product start.
    let mut inner_cfg = cfg.clone();
    inner_cfg.restarts = cfg.restarts.clamp(2, 4);
    let results: Vec<Result<ComplexityEstimate>> = fits
        .par_iter()
        .map(|(packets, _)| {
            let normalized: Vec<Packet> = packets.iter().map(|p| p.to_packet()).collect();
            let start = crate::fock::build_product_state(&geometry, &normalized)?;
            optimize_complexity(&psi, &start, &inner_cfg)
        })
        .collect();
    let mut best: Option<ComplexityEstimate> = None;
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(est) => {
                if best.as_ref().map_or(true, |b| est.upper < b.upper) {
                    best = Some(est);
                }
            }
            Err(e) => errors.push(e),
        }
    }
    match best {
        Some(est) => ComplexityEstimate::new(
            lower.min(est.upper),
            est.upper,
            est.witness,
            vec!["product-search".into()],
            est.converged,
        ),
        None => Err(errors
            .pop()
            .unwrap_or_else(|| Error::non_converged("no product start produced a feasible schedule"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexity::bounds::{
        build_point_pair_trajectory, lower_bound_point_pair, omega_state,
        point_pair_constructive_cost, point_pair_start,
    };
    use crate::fock::build_product_state;

    fn quick_cfg(seed: u64) -> OptimizerConfig {
        OptimizerConfig {
            steps: Some(8),
            restarts: 2,
            seed,
            rounds: 5,
            iters_per_round: 150,
            ..OptimizerConfig::default()
        }
    }

    #[test]
    fn zero_distance_for_identical_states() {
        let geom = LatticeGeometry::chain(3);
        let psi = omega_state(&geom, 2).unwrap();
        let est = optimize_complexity(&psi, &psi, &quick_cfg(1)).unwrap();
        assert_eq!(est.upper, 0.0);
    }

    #[test]
    fn zero_distance_modulo_global_phase() {
        let geom = LatticeGeometry::chain(3);
        let psi = omega_state(&geom, 2).unwrap();
        let rotated = psi.scaled(C64::from_polar(1.0, 0.83));
        let est = optimize_complexity(&rotated, &psi, &quick_cfg(2)).unwrap();
        assert_eq!(est.upper, 0.0);
    }

    #[test]
    fn rejects_unequal_particle_numbers() {
        let geom = LatticeGeometry::chain(3);
        let psi2 = omega_state(&geom, 2).unwrap();
        let psi1 = build_product_state(&geom, &[Packet::localized(&geom, 0, Spin::Up)]).unwrap();
        assert!(matches!(
            optimize_complexity(&psi2, &psi1, &quick_cfg(3)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn point_pair_sandwich_small() {
        // Warm-started run keeps the constructive cost as a ceiling and the
        // analytic bound as a floor.
        let geom = LatticeGeometry::chain(3);
        let n = 2;
        let target = omega_state(&geom, n).unwrap();
        let start = point_pair_start(&geom).unwrap();
        let mut cfg = quick_cfg(4);
        cfg.warm_starts = vec![build_point_pair_trajectory(&geom, n).unwrap()];
        let est = optimize_complexity(&target, &start, &cfg).unwrap();
        let ceiling = point_pair_constructive_cost(n);
        let floor = lower_bound_point_pair(n).unwrap();
        assert!(est.upper <= ceiling + 1e-6, "upper {}", est.upper);
        assert!(est.upper >= floor, "upper {} floor {floor}", est.upper);
        // The witness really reaches the target.
        let end = super::super::evolve(&est.witness, &start);
        assert!(end.overlap(&target) >= 1.0 - 1e-9);
    }

    #[test]
    fn certified_product_has_zero_complexity() {
        let geom = LatticeGeometry::chain(3);
        let psi = build_product_state(
            &geom,
            &[
                Packet::localized(&geom, 0, Spin::Up),
                Packet::localized(&geom, 2, Spin::Down),
            ],
        )
        .unwrap();
        let est = complexity_of_state(&psi, &quick_cfg(5)).unwrap();
        assert_eq!(est.upper, 0.0);
    }

    #[test]
    fn uncertified_product_detected_by_fit() {
        let geom = LatticeGeometry::chain(3);
        let psi = build_product_state(
            &geom,
            &[
                Packet::uniform(&geom, &[0, 1], Spin::Up),
                Packet::localized(&geom, 2, Spin::Down),
            ],
        )
        .unwrap();
        // Strip the certificate by rebuilding the amplitudes.
        let bare = StateVector::from_amplitudes(psi.sector().clone(), psi.amplitudes().clone());
        let est = complexity_of_state(&bare, &quick_cfg(6)).unwrap();
        assert_eq!(est.upper, 0.0, "method {:?}", est.method);
    }
}
