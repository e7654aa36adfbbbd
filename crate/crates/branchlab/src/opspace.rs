//! The space of local Hermitian controls: single-site terms, nearest-neighbor
//! pair terms orthogonal to the single-site embeddings, the inner product and
//! norm used for trajectory cost, sector embeddings, and a Lie-closure
//! reachability check.
//!
//! # Inner-product normalization
//!
//! All local terms are measured in the trace inner product of a
//! nearest-neighbor *pair* space: a pair term `g` contributes `Tr₁₆(g g')`,
//! and a single-site term `f` contributes `Tr₁₆((f⊗I)(f'⊗I)) = 4 Tr₄(f f')`.
//! With this normalization the termwise inner product equals
//! `4^(2-L) Tr(k̂ k̂')` over the full `4^L`-dimensional space, which is the
//! identity checked by [`inner_product_via_full_trace`].

use std::collections::BTreeMap;
use std::sync::Arc;


use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fock::{LatticeGeometry, SectorBasis};
use crate::linalg::{frob_norm, hermiticity_defect, CMat};

const VALIDATE_TOL: f64 = 1e-10;

/// Classification of a local control term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpClass {
    /// Single-site term (4×4).
    F,
    /// Pair term (16×16), orthogonal to both single-site embeddings.
    G,
}

/// Support of a local control term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Site(usize),
    Pair(usize, usize),
}

/// A validated local Hermitian control term.
#[derive(Debug, Clone)]
pub struct LocalOperator {
    pub support: Support,
    pub matrix: CMat,
    pub class: OpClass,
}

/// Per-site basis order `[empty, up, down, double]` as local number counts.
const LOCAL_COUNTS: [u32; 4] = [0, 1, 1, 2];

fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Validate a single-site term: Hermitian, traceless, commutes with the
/// site number operator (i.e. block-diagonal in local counts).
fn validate_f(m: &CMat) -> Result<()> {
    if m.nrows() != 4 || m.ncols() != 4 {
        return Err(Error::domain("single-site term must be 4×4"));
    }
    if hermiticity_defect(m) > VALIDATE_TOL {
        return Err(Error::domain("single-site term is not Hermitian"));
    }
    if m.trace().norm() > VALIDATE_TOL {
        return Err(Error::domain("single-site term is not traceless"));
    }
    for i in 0..4 {
        for j in 0..4 {
            if LOCAL_COUNTS[i] != LOCAL_COUNTS[j] && m[(i, j)].norm() > VALIDATE_TOL {
                return Err(Error::domain(
                    "single-site term does not commute with the site number operator",
                ));
            }
        }
    }
    Ok(())
}

/// Validate a pair term: Hermitian, traceless, commutes with the pair
/// number operator, and orthogonal to both single-site embeddings.
fn validate_g(m: &CMat) -> Result<()> {
    if m.nrows() != 16 || m.ncols() != 16 {
        return Err(Error::domain("pair term must be 16×16"));
    }
    if hermiticity_defect(m) > VALIDATE_TOL {
        return Err(Error::domain("pair term is not Hermitian"));
    }
    if m.trace().norm() > VALIDATE_TOL {
        return Err(Error::domain("pair term is not traceless"));
    }
    for i in 0..16 {
        for j in 0..16 {
            let ni = LOCAL_COUNTS[i / 4] + LOCAL_COUNTS[i % 4];
            let nj = LOCAL_COUNTS[j / 4] + LOCAL_COUNTS[j % 4];
            if ni != nj && m[(i, j)].norm() > VALIDATE_TOL {
                return Err(Error::domain(
                    "pair term does not commute with the pair number operator",
                ));
            }
        }
    }
    let id4 = identity(4);
    for f in basis_f_matrices() {
        let left = kron(&f, &id4);
        let right = kron(&id4, &f);
        if pair_trace(&left, m).abs() > 1e-8 || pair_trace(&right, m).abs() > 1e-8 {
            return Err(Error::domain(
                "pair term is not orthogonal to the single-site embeddings",
            ));
        }
    }
    Ok(())
}

/// `Tr(a b)` for Hermitian `a`, `b` (real by symmetry).
fn pair_trace(a: &CMat, b: &CMat) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc.re
}

/// Gram-Schmidt over the real span of Hermitian matrices under a given
/// trace inner product. Deterministic: candidates are processed in order.
fn orthonormalize(
    candidates: Vec<CMat>,
    fixed: &[CMat],
    inner: impl Fn(&CMat, &CMat) -> f64,
) -> Vec<CMat> {
    let mut basis: Vec<CMat> = Vec::new();
    for mut c in candidates {
        let scale = inner(&c, &c).sqrt().max(1e-300);
        for pass in 0..2 {
            let _ = pass;
            for b in fixed.iter().chain(basis.iter()) {
                let coeff = inner(b, &c) / inner(b, b);
                c -= b * C64::new(coeff, 0.0);
            }
        }
        let res = inner(&c, &c).sqrt();
        if res > 1e-8 * scale.max(1.0) {
            basis.push(&c / C64::new(res, 0.0));
        }
    }
    basis
}

/// Raw orthonormal single-site matrices, normalized so that the embedded
/// pair-trace norm is 1 (`4·Tr₄(f²) = 1`).
fn basis_f_matrices() -> Vec<CMat> {
    let mut candidates = Vec::new();
    // Projectors on the four local states, then the Hermitian off-diagonal
    // pair within the one-particle block.
    for i in 0..4 {
        let mut m = CMat::zeros(4, 4);
        m[(i, i)] = C64::new(1.0, 0.0);
        // make traceless up front
        for j in 0..4 {
            m[(j, j)] -= C64::new(0.25, 0.0);
        }
        candidates.push(m);
    }
    let mut x = CMat::zeros(4, 4);
    x[(1, 2)] = C64::new(1.0, 0.0);
    x[(2, 1)] = C64::new(1.0, 0.0);
    candidates.push(x);
    let mut y = CMat::zeros(4, 4);
    y[(1, 2)] = C64::new(0.0, -1.0);
    y[(2, 1)] = C64::new(0.0, 1.0);
    candidates.push(y);
    orthonormalize(candidates, &[], |a, b| 4.0 * pair_trace(a, b))
}

/// Orthonormal basis of single-site control terms at one site.
///
/// Traceless Hermitian 4×4 matrices block-diagonal in the local particle
/// count; five elements, orthonormal in the operator-space inner product.
pub fn basis_f(site: usize) -> Vec<LocalOperator> {
    basis_f_matrices()
        .into_iter()
        .map(|m| LocalOperator {
            support: Support::Site(site),
            matrix: m,
            class: OpClass::F,
        })
        .collect()
}

/// Raw orthonormal pair matrices (59 of them), orthogonal to the identity
/// and to both single-site embeddings, normalized in the 16-dim trace.
fn basis_g_matrices() -> Vec<CMat> {
    // Spanning set: Hermitian elementary matrices within each block of the
    // pair number operator (block sizes 1, 4, 6, 4, 1 → 70 real dimensions).
    let mut candidates = Vec::new();
    let count = |l: usize| LOCAL_COUNTS[l / 4] + LOCAL_COUNTS[l % 4];
    for i in 0..16 {
        let mut m = CMat::zeros(16, 16);
        m[(i, i)] = C64::new(1.0, 0.0);
        candidates.push(m);
    }
    for i in 0..16 {
        for j in i + 1..16 {
            if count(i) != count(j) {
                continue;
            }
            let mut x = CMat::zeros(16, 16);
            x[(i, j)] = C64::new(1.0, 0.0);
            x[(j, i)] = C64::new(1.0, 0.0);
            candidates.push(x);
            let mut y = CMat::zeros(16, 16);
            y[(i, j)] = C64::new(0.0, -1.0);
            y[(j, i)] = C64::new(0.0, 1.0);
            candidates.push(y);
        }
    }
    // Fixed subspace to remove: identity plus both single-site embeddings.
    let id4 = identity(4);
    let mut fixed = vec![identity(16)];
    for f in basis_f_matrices() {
        fixed.push(kron(&f, &id4));
        fixed.push(kron(&id4, &f));
    }
    orthonormalize(candidates, &fixed, pair_trace)
}

/// Orthonormal basis of pair control terms on a nearest-neighbor pair.
pub fn basis_g(geometry: &LatticeGeometry, x: usize, y: usize) -> Result<Vec<LocalOperator>> {
    if !geometry.are_neighbors(x, y) || x >= y {
        return Err(Error::domain(format!(
            "({x}, {y}) is not an ordered nearest-neighbor pair"
        )));
    }
    Ok(basis_g_matrices()
        .into_iter()
        .map(|m| LocalOperator {
            support: Support::Pair(x, y),
            matrix: m,
            class: OpClass::G,
        })
        .collect())
}

/// One control element: single-site terms on distinct sites plus pair terms
/// on distinct nearest-neighbor pairs (pairs may share one site, never both).
#[derive(Debug, Clone)]
pub struct ControlField {
    geometry: LatticeGeometry,
    f_terms: BTreeMap<usize, CMat>,
    g_terms: BTreeMap<(usize, usize), CMat>,
}

impl ControlField {
    pub fn zero(geometry: &LatticeGeometry) -> ControlField {
        ControlField {
            geometry: geometry.clone(),
            f_terms: BTreeMap::new(),
            g_terms: BTreeMap::new(),
        }
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    /// Set the single-site term at `site` (replacing any existing one).
    pub fn set_f(&mut self, site: usize, m: CMat) -> Result<()> {
        if site >= self.geometry.num_sites() {
            return Err(Error::domain(format!("site {site} outside lattice")));
        }
        validate_f(&m)?;
        self.f_terms.insert(site, m);
        Ok(())
    }

    /// Set the pair term at the ordered nearest-neighbor pair `(x, y)`.
    pub fn set_g(&mut self, x: usize, y: usize, m: CMat) -> Result<()> {
        if !self.geometry.are_neighbors(x, y) || x >= y {
            return Err(Error::domain(format!(
                "({x}, {y}) is not an ordered nearest-neighbor pair"
            )));
        }
        validate_g(&m)?;
        self.g_terms.insert((x, y), m);
        Ok(())
    }

    pub fn f_terms(&self) -> &BTreeMap<usize, CMat> {
        &self.f_terms
    }

    pub fn g_terms(&self) -> &BTreeMap<(usize, usize), CMat> {
        &self.g_terms
    }

    pub fn g_term(&self, x: usize, y: usize) -> Option<&CMat> {
        self.g_terms.get(&(x, y))
    }

    pub fn is_zero(&self) -> bool {
        self.f_terms.is_empty() && self.g_terms.is_empty()
    }

    pub fn scaled(&self, c: f64) -> ControlField {
        let mut out = self.clone();
        for m in out.f_terms.values_mut() {
            *m *= C64::new(c, 0.0);
        }
        for m in out.g_terms.values_mut() {
            *m *= C64::new(c, 0.0);
        }
        out
    }

    pub fn add(&self, other: &ControlField) -> Result<ControlField> {
        if self.geometry != other.geometry {
            return Err(Error::domain("control fields live on different lattices"));
        }
        let mut out = self.clone();
        for (site, m) in &other.f_terms {
            out.f_terms
                .entry(*site)
                .and_modify(|e| *e += m)
                .or_insert_with(|| m.clone());
        }
        for (pair, m) in &other.g_terms {
            out.g_terms
                .entry(*pair)
                .and_modify(|e| *e += m)
                .or_insert_with(|| m.clone());
        }
        Ok(out)
    }

    pub fn norm_sqr(&self) -> f64 {
        inner_product(self, self).expect("same geometry")
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }
}

/// Termwise operator-space inner product; missing terms count as zero.
pub fn inner_product(k: &ControlField, kp: &ControlField) -> Result<f64> {
    if k.geometry != kp.geometry {
        return Err(Error::domain("control fields live on different lattices"));
    }
    let mut acc = 0.0;
    for (site, f) in &k.f_terms {
        if let Some(fp) = kp.f_terms.get(site) {
            acc += 4.0 * pair_trace(f, fp);
        }
    }
    for (pair, g) in &k.g_terms {
        if let Some(gp) = kp.g_terms.get(pair) {
            acc += pair_trace(g, gp);
        }
    }
    Ok(acc)
}

/// Restrict a control field to one particle-number sector.
pub fn embed(k: &ControlField, sector: &Arc<SectorBasis>) -> CMat {
    let d = sector.dim();
    let mut h = CMat::zeros(d, d);
    for (&site, m) in &k.f_terms {
        add_embedded_site(&mut h, sector, site, m);
    }
    for (&(x, y), m) in &k.g_terms {
        add_embedded_pair(&mut h, sector, x, y, m);
    }
    h
}

/// Restrict a single local operator to one sector.
pub fn embed_local(op: &LocalOperator, sector: &Arc<SectorBasis>) -> CMat {
    let d = sector.dim();
    let mut h = CMat::zeros(d, d);
    match op.support {
        Support::Site(x) => add_embedded_site(&mut h, sector, x, &op.matrix),
        Support::Pair(x, y) => add_embedded_pair(&mut h, sector, x, y, &op.matrix),
    }
    h
}

/// Restrict a bare pair matrix on `(x, y)` to one sector without class
/// validation (used where the matrix is already known to be admissible).
pub fn embed_pair_term(sector: &Arc<SectorBasis>, x: usize, y: usize, m: &CMat) -> CMat {
    let d = sector.dim();
    let mut h = CMat::zeros(d, d);
    add_embedded_pair(&mut h, sector, x, y, m);
    h
}

/// Sparse triplets of a local operator restricted to one sector.
pub fn embed_local_sparse(op: &LocalOperator, sector: &Arc<SectorBasis>) -> Vec<(usize, usize, C64)> {
    let h = embed_local(op, sector);
    let mut out = Vec::new();
    for j in 0..h.ncols() {
        for i in 0..h.nrows() {
            if h[(i, j)].norm_sqr() > 0.0 {
                out.push((i, j, h[(i, j)]));
            }
        }
    }
    out
}

fn site_mask(site: usize) -> u64 {
    0b11 << (2 * site)
}

fn occ_bits(occ: usize, site: usize) -> u64 {
    // local index [empty, up, down, double] -> mode bits at the site
    let bits = match occ {
        0 => 0b00,
        1 => 0b01,
        2 => 0b10,
        3 => 0b11,
        _ => unreachable!(),
    };
    bits << (2 * site)
}

fn add_embedded_site(h: &mut CMat, sector: &Arc<SectorBasis>, site: usize, m: &CMat) {
    for (i, s) in sector.states().iter().enumerate() {
        let o = s.occ(site).local_index();
        for op in 0..4 {
            if LOCAL_COUNTS[op] != LOCAL_COUNTS[o] {
                continue;
            }
            let v = m[(op, o)];
            if v.norm_sqr() == 0.0 {
                continue;
            }
            let mask = s.0 & !site_mask(site) | occ_bits(op, site);
            let j = sector
                .index_of(crate::fock::FockState(mask))
                .expect("count-preserving move stays in the sector");
            h[(j, i)] += v;
        }
    }
}

fn add_embedded_pair(h: &mut CMat, sector: &Arc<SectorBasis>, x: usize, y: usize, m: &CMat) {
    for (i, s) in sector.states().iter().enumerate() {
        let l = 4 * s.occ(x).local_index() + s.occ(y).local_index();
        let count = LOCAL_COUNTS[l / 4] + LOCAL_COUNTS[l % 4];
        for lp in 0..16 {
            if LOCAL_COUNTS[lp / 4] + LOCAL_COUNTS[lp % 4] != count {
                continue;
            }
            let v = m[(lp, l)];
            if v.norm_sqr() == 0.0 {
                continue;
            }
            let mask = s.0 & !site_mask(x) & !site_mask(y)
                | occ_bits(lp / 4, x)
                | occ_bits(lp % 4, y);
            let j = sector
                .index_of(crate::fock::FockState(mask))
                .expect("count-preserving move stays in the sector");
            h[(j, i)] += v;
        }
    }
}

/// Embed a control field into the full `4^L` product space (test-scale
/// lattices only) and form `4^(2-L) Tr(k̂ k̂')`, the full-trace route to the
/// operator-space inner product.
pub fn inner_product_via_full_trace(k: &ControlField, kp: &ControlField) -> Result<f64> {
    if k.geometry != kp.geometry {
        return Err(Error::domain("control fields live on different lattices"));
    }
    let sites = k.geometry.num_sites();
    if sites > 6 {
        return Err(Error::cap(format!(
            "full-space trace needs 4^{sites} dimensions; limit is 4^6"
        )));
    }
    let a = embed_full(k);
    let b = embed_full(kp);
    let mut tr = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            tr += a[(i, j)] * b[(j, i)];
        }
    }
    Ok(4f64.powi(2 - sites as i32) * tr.re)
}

/// Dense embedding of a control field into the full product space.
fn embed_full(k: &ControlField) -> CMat {
    let sites = k.geometry.num_sites();
    let dim = 4usize.pow(sites as u32);
    let mut h = CMat::zeros(dim, dim);
    let occ_of = |idx: usize, site: usize| idx / 4usize.pow(site as u32) % 4;
    let replace = |idx: usize, site: usize, occ: usize| {
        let p = 4usize.pow(site as u32);
        idx - occ_of(idx, site) * p + occ * p
    };
    for (&site, m) in &k.f_terms {
        for i in 0..dim {
            let o = occ_of(i, site);
            for op in 0..4 {
                let v = m[(op, o)];
                if v.norm_sqr() > 0.0 {
                    h[(replace(i, site, op), i)] += v;
                }
            }
        }
    }
    for (&(x, y), m) in &k.g_terms {
        for i in 0..dim {
            let l = 4 * occ_of(i, x) + occ_of(i, y);
            for lp in 0..16 {
                let v = m[(lp, l)];
                if v.norm_sqr() > 0.0 {
                    let j = replace(replace(i, x, lp / 4), y, lp % 4);
                    h[(j, i)] += v;
                }
            }
        }
    }
    h
}

/// A control field with independent standard-normal coefficients over the
/// orthonormal term bases. Deterministic given the generator state.
pub fn random_control_field(geometry: &LatticeGeometry, rng: &mut impl Rng) -> ControlField {
    let mut k = ControlField::zero(geometry);
    let fs = basis_f_matrices();
    let gs = basis_g_matrices();
    let normal = rand_distr_standard_normal;
    for site in 0..geometry.num_sites() {
        let mut m = CMat::zeros(4, 4);
        for f in &fs {
            m += f * C64::new(normal(rng), 0.0);
        }
        k.set_f(site, m).expect("basis terms validate");
    }
    for (x, y) in geometry.neighbor_pairs() {
        let mut m = CMat::zeros(16, 16);
        for g in &gs {
            m += g * C64::new(normal(rng), 0.0);
        }
        k.set_g(x, y, m).expect("basis terms validate");
    }
    k
}

fn rand_distr_standard_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller; two uniforms per call is fine at this scale.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Outcome of the Lie-closure reachability check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LieClosureReport {
    pub generator_count: usize,
    pub closure_dim: usize,
    pub expected_dim: usize,
    pub pass: bool,
    /// Per-sector `(n, sector_dim, closure_dim, expected_dim)`.
    pub sectors: Vec<(u32, usize, usize, usize)>,
}

/// Iteratively close the span of all embedded control generators under
/// `i[·,·]`, sector by sector, and compare against the direct-sum dimension
/// `Σ (d_n² - 1)`.
///
/// Generators are taken modulo the sector identity: the trace part of a
/// sector restriction only generates a global phase, which the endpoint
/// condition quotients out, so the reachable group is compared against the
/// special unitaries. On the vacuum sector nothing remains and the closure
/// dimension is zero.
pub fn lie_closure(
    geometry: &LatticeGeometry,
    sector_numbers: &[u32],
    cap: usize,
) -> Result<LieClosureReport> {
    let mut expected_total = 0usize;
    let mut dims = Vec::new();
    for &n in sector_numbers {
        let sector = SectorBasis::new(geometry, n)?;
        let d = sector.dim();
        expected_total += d * d - 1;
        dims.push(d);
    }
    if expected_total > cap {
        return Err(Error::cap(format!(
            "closure dimension would be {expected_total} (sector dims {dims:?}); cap is {cap}"
        )));
    }

    let mut generators_per_sector = 0usize;
    let mut sectors = Vec::new();
    let mut closure_total = 0usize;
    for &n in sector_numbers {
        let sector = SectorBasis::new(geometry, n)?;
        let d = sector.dim();
        // Shift each generator by its sector trace; commutators are then
        // automatically traceless.
        let traceless = |m: CMat| -> CMat {
            let shift = m.trace() / C64::new(d as f64, 0.0);
            let mut out = m;
            for i in 0..d {
                out[(i, i)] -= shift;
            }
            out
        };
        let mut gens: Vec<CMat> = Vec::new();
        for site in 0..geometry.num_sites() {
            for op in basis_f(site) {
                gens.push(traceless(embed_local(&op, &sector)));
            }
        }
        for (x, y) in geometry.neighbor_pairs() {
            for op in basis_g(geometry, x, y).expect("neighbor pairs are valid") {
                gens.push(traceless(embed_local(&op, &sector)));
            }
        }
        generators_per_sector = gens.len();
        let dim = closure_dimension(&gens, d);
        let expected = d * d - 1;
        closure_total += dim;
        sectors.push((n, d, dim, expected));
    }

    Ok(LieClosureReport {
        generator_count: generators_per_sector,
        closure_dim: closure_total,
        expected_dim: expected_total,
        pass: closure_total == expected_total,
        sectors,
    })
}

/// Dimension of the Lie algebra generated by `gens` inside `su(d)`-sized
/// Hermitian matrices. Right-nested brackets with the generators suffice to
/// span the generated algebra, so each new basis element is bracketed
/// against the generators only.
fn closure_dimension(gens: &[CMat], d: usize) -> usize {
    let target = d * d - 1;
    let flat = |m: &CMat| -> Vec<C64> { m.iter().copied().collect() };
    let inner = |a: &[C64], b: &[C64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum()
    };
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut basis_mats: Vec<CMat> = Vec::new();
    let mut queue: Vec<CMat> = Vec::new();

    let push = |m: CMat,
                    basis: &mut Vec<Vec<C64>>,
                    basis_mats: &mut Vec<CMat>,
                    queue: &mut Vec<CMat>| {
        let scale = frob_norm(&m);
        if scale < 1e-14 {
            return;
        }
        let mut v = flat(&m);
        for _ in 0..2 {
            for b in basis.iter() {
                let c = inner(b, &v);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= C64::new(c, 0.0) * bi;
                }
            }
        }
        let res = inner(&v, &v).sqrt();
        if res > 1e-8 * scale {
            let inv = C64::new(1.0 / res, 0.0);
            let vn: Vec<C64> = v.iter().map(|z| z * inv).collect();
            let mat = CMat::from_iterator(d, d, vn.iter().copied());
            basis.push(vn);
            basis_mats.push(mat.clone());
            queue.push(mat);
        }
    };

    for g in gens {
        push(g.clone(), &mut basis, &mut basis_mats, &mut queue);
    }
    while let Some(h) = queue.pop() {
        if basis.len() >= target {
            break;
        }
        for g in gens {
            let c = (&h * g - g * &h) * C64::new(0.0, 1.0);
            push(c, &mut basis, &mut basis_mats, &mut queue);
            if basis.len() >= target {
                break;
            }
        }
    }
    basis.len()
}
