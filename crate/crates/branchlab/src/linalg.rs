//! Small dense complex linear-algebra helpers shared across modules.
//!
//! Everything here operates on `nalgebra` dynamic matrices at desk scale
//! (dimensions up to a few hundred), so dense eigendecompositions are fine.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Frobenius inner product `Tr(a† b)`.
pub fn frob_inner(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Frobenius norm.
pub fn frob_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Hermiticity defect `‖a − a†‖`.
pub fn hermiticity_defect(a: &CMat) -> f64 {
    frob_norm(&(a - a.adjoint()))
}

/// Eigendecomposition of a Hermitian matrix: `(eigenvalues, eigenvectors)`.
///
/// Eigenvectors are the columns of the returned matrix, in the same order
/// as the eigenvalues.
pub fn hermitian_eigen(h: &CMat) -> (Vec<f64>, CMat) {
    debug_assert!(hermiticity_defect(h) < 1e-9 * (1.0 + frob_norm(h)));
    let eig = h.clone().symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// `exp(-i t h)` for Hermitian `h`, via eigendecomposition.
pub fn expi_hermitian(h: &CMat, t: f64) -> CMat {
    let (vals, vecs) = hermitian_eigen(h);
    expi_from_eigen(&vals, &vecs, t)
}

/// `exp(-i t h)` from a precomputed eigendecomposition of `h`.
pub fn expi_from_eigen(vals: &[f64], vecs: &CMat, t: f64) -> CMat {
    let d = vals.len();
    let mut scaled = vecs.clone();
    for (j, &lam) in vals.iter().enumerate() {
        let phase = C64::from_polar(1.0, -t * lam);
        for i in 0..d {
            scaled[(i, j)] *= phase;
        }
    }
    scaled * vecs.adjoint()
}

/// Apply `exp(-i t h)` to a vector without forming the full propagator.
pub fn apply_expi(vals: &[f64], vecs: &CMat, t: f64, v: &CVec) -> CVec {
    let mut w = vecs.adjoint() * v;
    for (j, &lam) in vals.iter().enumerate() {
        w[j] *= C64::from_polar(1.0, -t * lam);
    }
    vecs * w
}

/// Composite Simpson quadrature of `f` on `[a, b]` with `2n` panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let m = 2 * n.max(1);
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expi_inverts() {
        let h = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new(0.3, 0.0),
                C64::new(0.1, 0.7),
                C64::new(0.1, -0.7),
                C64::new(-1.2, 0.0),
            ],
        );
        let u = expi_hermitian(&h, 0.8);
        let uinv = expi_hermitian(&h, -0.8);
        let id = &u * &uinv;
        assert!((id[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(id[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn simpson_integrates_polynomial() {
        let v = simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 64);
        assert!((v - 0.0).abs() < 1e-12);
    }
}
