//! Schmidt spectra of two-particle chain states across site cuts, the
//! rotation rates those spectra pick up under a control field, and the
//! trajectory audit that turns integrated rotation into a cost bound.
//!
//! For a two-particle state and a cut after site `p` (left block = sites
//! `0..=p`), the spectrum is organized by the particle split between the
//! blocks: index 0 holds the (0,2) value, index 1 the (2,0) value, and
//! indices 2.. the (1,1) singular values in decreasing order.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{FockState, StateVector};
use crate::linalg::{CMat, CVec};
use crate::opspace::{embed_pair_term, ControlField};

use super::{evolve, ControlTrajectory};

pub const SQRT8: f64 = 2.0 * std::f64::consts::SQRT_2;

/// Schmidt values at one cut, in the fixed block order.
#[derive(Debug, Clone)]
pub struct SchmidtSpectrum {
    pub cut: usize,
    pub values: Vec<f64>,
}

impl SchmidtSpectrum {
    /// Top (1,1) value, or 0 if the block is empty.
    pub fn top_one_one(&self) -> f64 {
        self.values.get(2).copied().unwrap_or(0.0)
    }

    /// Second (1,1) value, or 0.
    pub fn second_one_one(&self) -> f64 {
        self.values.get(3).copied().unwrap_or(0.0)
    }
}

/// Alignment-respecting dot product of two spectra (shorter one padded).
pub fn spectrum_dot(a: &SchmidtSpectrum, b: &SchmidtSpectrum) -> f64 {
    a.values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| x * y)
        .sum()
}

/// Great-circle angle between two spectra on the unit sphere.
pub fn spectrum_angle(a: &SchmidtSpectrum, b: &SchmidtSpectrum) -> f64 {
    spectrum_dot(a, b).clamp(-1.0, 1.0).acos()
}

/// One Schmidt term with its full-sector product vector `|φ_i⟩|χ_i⟩`.
#[derive(Debug, Clone)]
struct SchmidtTerm {
    value: f64,
    vector: Option<CVec>,
}

/// Schmidt decomposition of a two-particle chain state at one cut.
#[derive(Debug)]
pub struct SchmidtDecomposition {
    pub cut: usize,
    terms: Vec<SchmidtTerm>,
}

impl SchmidtDecomposition {
    pub fn spectrum(&self) -> SchmidtSpectrum {
        SchmidtSpectrum {
            cut: self.cut,
            values: self.terms.iter().map(|t| t.value).collect(),
        }
    }

    /// Smallest gap between distinct spectrum values (degeneracy witness).
    pub fn min_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for (i, a) in self.terms.iter().enumerate() {
            for b in &self.terms[i + 1..] {
                gap = gap.min((a.value - b.value).abs());
            }
        }
        gap
    }
}

fn check_two_particle_chain(psi: &StateVector, cut: usize) -> Result<()> {
    let geom = psi.sector().geometry();
    if !geom.is_chain() {
        return Err(Error::domain("Schmidt cuts are defined on chains"));
    }
    if psi.sector().particle_number() != 2 {
        return Err(Error::domain(
            "the Schmidt audit machinery handles two-particle sectors",
        ));
    }
    if cut + 2 > geom.num_sites() {
        return Err(Error::domain(format!(
            "cut {cut} is outside the lattice (needs sites on both sides)"
        )));
    }
    Ok(())
}

/// Full Schmidt decomposition at one cut.
pub fn schmidt_decomposition(psi: &StateVector, cut: usize) -> Result<SchmidtDecomposition> {
    check_two_particle_chain(psi, cut)?;
    let sector = psi.sector();
    let left_modes = 2 * (cut + 1);
    let left_mask_all: u64 = (1 << left_modes) - 1;

    // Collect block entries keyed by (left pattern, right pattern).
    let mut corner02: BTreeMap<u64, C64> = BTreeMap::new();
    let mut corner20: BTreeMap<u64, C64> = BTreeMap::new();
    let mut block11: BTreeMap<(u64, u64), C64> = BTreeMap::new();
    for (i, s) in sector.states().iter().enumerate() {
        let a = psi.amplitudes()[i];
        let l = s.0 & left_mask_all;
        let r = s.0 >> left_modes;
        match l.count_ones() {
            0 => {
                corner02.insert(r, a);
            }
            2 => {
                corner20.insert(l, a);
            }
            1 => {
                block11.insert((l, r), a);
            }
            _ => unreachable!("two-particle sector"),
        }
    }

    let compose = |l: u64, r: u64| FockState(l | r << left_modes);
    let mut terms = Vec::new();

    // (0,2): left vacuum against a right two-particle vector, rank ≤ 1.
    let s0: f64 = corner02.values().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let v0 = if s0 > 0.0 {
        let mut v = CVec::zeros(sector.dim());
        for (&r, &a) in &corner02 {
            let idx = sector.index_of(compose(0, r)).expect("pattern in sector");
            v[idx] = a / C64::new(s0, 0.0);
        }
        Some(v)
    } else {
        None
    };
    terms.push(SchmidtTerm {
        value: s0,
        vector: v0,
    });

    // (2,0) analogously.
    let s1: f64 = corner20.values().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let v1 = if s1 > 0.0 {
        let mut v = CVec::zeros(sector.dim());
        for (&l, &a) in &corner20 {
            let idx = sector.index_of(compose(l, 0)).expect("pattern in sector");
            v[idx] = a / C64::new(s1, 0.0);
        }
        Some(v)
    } else {
        None
    };
    terms.push(SchmidtTerm {
        value: s1,
        vector: v1,
    });

    // (1,1): single-particle left mode against single-particle right mode.
    let right_modes = sector.geometry().num_modes() - left_modes;
    let mut m = CMat::zeros(left_modes, right_modes);
    for (&(l, r), &a) in &block11 {
        m[(l.trailing_zeros() as usize, r.trailing_zeros() as usize)] = a;
    }
    let svd = m.svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
    });
    for &i in &order {
        let sv = svd.singular_values[i];
        let vector = if sv > 0.0 {
            let mut v = CVec::zeros(sector.dim());
            for l in 0..left_modes {
                for r in 0..right_modes {
                    let coeff = u[(l, i)] * vt[(i, r)];
                    if coeff.norm_sqr() == 0.0 {
                        continue;
                    }
                    let idx = sector
                        .index_of(compose(1 << l, 1 << r))
                        .expect("pattern in sector");
                    v[idx] = coeff;
                }
            }
            Some(v)
        } else {
            None
        };
        terms.push(SchmidtTerm { value: sv, vector });
    }

    Ok(SchmidtDecomposition { cut, terms })
}

/// Schmidt values only.
pub fn schmidt_spectrum(psi: &StateVector, cut: usize) -> Result<SchmidtSpectrum> {
    Ok(schmidt_decomposition(psi, cut)?.spectrum())
}

/// First-order rotation rates of the Schmidt values at one cut under a
/// control field, `u_i = d s_i/dt` for evolution `exp(-i t k̂)`.
#[derive(Debug, Clone)]
pub struct RotationRates {
    pub cut: usize,
    pub rates: Vec<f64>,
    /// Euclidean rate of the whole spectrum vector, `|θ_p|`.
    pub theta: f64,
    /// Smallest gap between spectrum values; rates turn basis-sensitive
    /// as values cross.
    pub min_gap: f64,
    /// Set when spectrum values nearly coincide or vanish; individual
    /// rates are then basis-dependent, though `theta` remains a valid
    /// rotation-speed bound for the merged subspace.
    pub degenerate: bool,
}

/// Rotation rates at `cut` for evolution under `k`.
///
/// Only the pair term of `k` on `(cut, cut+1)` moves the spectrum; every
/// other term acts unitarily within one block. Rates follow from first-order
/// perturbation of the singular values: `u_i = Im ⟨φ_i χ_i| ĝ |ψ⟩`.
pub fn rotation_rates(psi: &StateVector, k: &ControlField, cut: usize) -> Result<RotationRates> {
    let decomp = schmidt_decomposition(psi, cut)?;
    let n_terms = decomp.terms.len();
    let min_gap = decomp.min_gap();
    let g = match k.g_term(cut, cut + 1) {
        None => {
            return Ok(RotationRates {
                cut,
                rates: vec![0.0; n_terms],
                theta: 0.0,
                min_gap,
                degenerate: false,
            })
        }
        Some(g) => g,
    };
    let gpsi = embed_pair_term(psi.sector(), cut, cut + 1, g) * psi.amplitudes();
    let mut rates = Vec::with_capacity(n_terms);
    for term in &decomp.terms {
        match &term.vector {
            Some(v) => rates.push(v.dotc(&gpsi).im),
            None => rates.push(0.0),
        }
    }
    let theta = rates.iter().map(|u| u * u).sum::<f64>().sqrt();
    let degenerate = min_gap < 1e-8 || decomp.terms.iter().any(|t| t.value.abs() < 1e-10);
    Ok(RotationRates {
        cut,
        rates,
        theta,
        min_gap,
        degenerate,
    })
}

/// Integrated Schmidt rotation of a trajectory, per cut, with the derived
/// cost lower bound.
#[derive(Debug, Clone)]
pub struct RotationAudit {
    /// `∫ |θ_p(t)| dt` per cut.
    pub per_cut: Vec<f64>,
    pub total_angle: f64,
    /// `total_angle / (2√2)`, a lower bound on the trajectory cost.
    pub lower_bound: f64,
    pub cost: f64,
    /// `lower_bound / cost` (at most 1 up to quadrature error).
    pub bound_ratio: f64,
}

/// Numerically integrate `Σ_p |θ_p(t)|` along a trajectory.
///
/// Each step is sampled at `substeps` midpoints (midpoint samples also
/// avoid the rank-deficient spectra that sit exactly at step boundaries;
/// the integrand is bounded pointwise by `2√2 ‖k‖`, so the derived bound
/// stays valid at any resolution). Fails if the integrated per-cut angle
/// falls short of the direct angle between endpoint spectra, which signals
/// integration too coarse to trust.
pub fn angle_audit(
    traj: &ControlTrajectory,
    psi0: &StateVector,
    substeps: usize,
) -> Result<RotationAudit> {
    check_two_particle_chain(psi0, 0)?;
    let substeps = substeps.max(1);
    let cuts = psi0.sector().geometry().num_sites() - 1;
    let mut per_cut = vec![0.0; cuts];
    let mut state = psi0.clone();
    for step in traj.steps() {
        let half =
            ControlTrajectory::new(vec![(step.duration / (2 * substeps) as f64, step.field.clone())])
                .expect("positive duration");
        for _ in 0..substeps {
            let mid = evolve(&half, &state);
            for (p, acc) in per_cut.iter_mut().enumerate() {
                let rates = rotation_rates(&mid, &step.field, p)?;
                *acc += rates.theta * step.duration / substeps as f64;
            }
            state = evolve(&half, &mid);
        }
    }
    // Consistency: total rotation can never undershoot the endpoint angle.
    for p in 0..cuts {
        let a = schmidt_spectrum(psi0, p)?;
        let b = schmidt_spectrum(&state, p)?;
        let direct = spectrum_angle(&a, &b);
        if per_cut[p] < direct - 1e-6 {
            return Err(Error::non_converged(format!(
                "audit integration too coarse at cut {p}: integrated {:.6} < direct {:.6}",
                per_cut[p], direct
            )));
        }
    }
    let total_angle: f64 = per_cut.iter().sum();
    let cost = traj.cost();
    let lower_bound = total_angle / SQRT8;
    Ok(RotationAudit {
        per_cut,
        total_angle,
        lower_bound,
        cost,
        bound_ratio: if cost > 0.0 { lower_bound / cost } else { 0.0 },
    })
}

/// Cost lower bound for steering `start` to `target`: summed endpoint
/// spectrum angles over all cuts, divided by `2√2`.
pub fn endpoint_angle_bound(start: &StateVector, target: &StateVector) -> Result<f64> {
    check_two_particle_chain(start, 0)?;
    let cuts = start.sector().geometry().num_sites() - 1;
    let mut total = 0.0;
    for p in 0..cuts {
        let a = schmidt_spectrum(start, p)?;
        let b = schmidt_spectrum(target, p)?;
        total += spectrum_angle(&a, &b);
    }
    Ok(total / SQRT8)
}

/// Largest dot product between `s` and any spectrum reachable by a
/// two-particle Slater determinant (which contains every product state).
///
/// Slater spectra have at most two (1,1) values `σ1 ≥ σ2` constrained by
/// `σ1 σ2 = s0 s1`; the feasible set is swept by two parameters and the
/// dot is maximized over it.
pub fn product_spectrum_dot(s: &SchmidtSpectrum) -> f64 {
    let (t0, t1) = (s.values[0], s.values[1]);
    let (t2, t3) = (s.top_one_one(), s.second_one_one());
    // For fixed analyzer angle a, the corner weights are (t·cos a, t·sin a)
    // and the (1,1) pair is fixed by σ1σ2 = t²·cos a·sin a with
    // σ1²+σ2² = 1-t²; feasibility caps t at 1/√(1+sin 2a). The objective
    // is concave in t (linear plus concave square roots), so an exact
    // ternary search over t nests inside a scan over a.
    let objective = |t: f64, a: f64| -> f64 {
        let (sa, ca) = a.sin_cos();
        let cross = t * t * 2.0 * sa * ca;
        let sum_sq = 1.0 - t * t;
        let sp = (sum_sq + cross).max(0.0).sqrt();
        let sm = (sum_sq - cross).max(0.0).sqrt();
        t * (t0 * ca + t1 * sa) + 0.5 * (sp * (t2 + t3) + sm * (t2 - t3))
    };
    let best_over_t = |a: f64| -> f64 {
        let t_max = 1.0 / (1.0 + (2.0 * a).sin()).sqrt();
        let (mut lo, mut hi) = (0.0f64, t_max);
        for _ in 0..70 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if objective(m1, a) < objective(m2, a) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        objective(0.5 * (lo + hi), a)
            .max(objective(t_max, a))
            .max(objective(0.0, a))
    };
    let grid = 256;
    let mut best = (0.0f64, f64::NEG_INFINITY);
    for j in 0..=grid {
        let a = FRAC_PI_2 * j as f64 / grid as f64;
        let v = best_over_t(a);
        if v > best.1 {
            best = (a, v);
        }
    }
    // Golden-section refinement over a around the grid optimum.
    let (mut lo, mut hi) = (
        (best.0 - FRAC_PI_2 / grid as f64).max(0.0),
        (best.0 + FRAC_PI_2 / grid as f64).min(FRAC_PI_2),
    );
    for _ in 0..60 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if best_over_t(m1) < best_over_t(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    best.1.max(best_over_t(0.5 * (lo + hi))).clamp(0.0, 1.0)
}

/// Cost lower bound from `psi` to the nearest product state: per-cut angle
/// to the closest product-reachable spectrum, summed and divided by `2√2`.
///
/// Vanishes on product states and equals `n·(π/4)/(2√2)` on a two-point
/// entangled pair at distance `n`.
pub fn product_distance_bound(psi: &StateVector) -> Result<f64> {
    check_two_particle_chain(psi, 0)?;
    let cuts = psi.sector().geometry().num_sites() - 1;
    let mut total = 0.0;
    for p in 0..cuts {
        let s = schmidt_spectrum(psi, p)?;
        total += product_spectrum_dot(&s).acos();
    }
    Ok(total / SQRT8)
}
