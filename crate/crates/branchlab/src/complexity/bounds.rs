//! Analytic cost bounds for two-particle entangled pairs and the
//! constructive control trajectories that realize the upper bounds.
//!
//! The reference states live on a chain: an entangled pair with both
//! particles at single sites (`omega_state`, distance `n`), and a variant
//! whose second particle is spread uniformly over `r` sites
//! (`omega_extended_state`).

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{
    apply_creation, build_product_state, vacuum_state, LatticeGeometry, Packet, Spin, StateVector,
};
use crate::linalg::{simpson, CMat};
use crate::opspace::ControlField;

use super::schmidt::SQRT8;
use super::ControlTrajectory;

/// Lower cost bound for the point-pair state at distance `n`: `n·π/(8√2)`.
pub fn lower_bound_point_pair(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain("point-pair distance must be at least 2"));
    }
    Ok(n as f64 * PI / (8.0 * SQRT_2))
}

/// `κ(r) = (1/r) Σ_{0<s<r} asin(√(s/(2r)))`.
pub fn kappa(r: usize) -> Result<f64> {
    if r < 2 {
        return Err(Error::domain("width must be at least 2"));
    }
    let rr = r as f64;
    Ok((1..r).map(|s| (s as f64 / (2.0 * rr)).sqrt().asin()).sum::<f64>() / rr)
}

/// Large-width limit of `κ`, evaluated by quadrature of
/// `∫₀¹ asin(√(x/2)) dx` (substituting `x = u²` keeps the integrand smooth).
pub fn kappa_limit_quadrature() -> f64 {
    simpson(|u| (u / SQRT_2).asin() * 2.0 * u, 0.0, 1.0, 2000)
}

/// `λ(r) = (1/r) Σ_{0<s<r} asin(√(s/(s+1)))`.
pub fn lambda(r: usize) -> Result<f64> {
    if r < 2 {
        return Err(Error::domain("width must be at least 2"));
    }
    Ok((1..r)
        .map(|s| (s as f64 / (s as f64 + 1.0)).sqrt().asin())
        .sum::<f64>()
        / r as f64)
}

/// Large-width limit of `λ`.
pub fn lambda_limit() -> f64 {
    FRAC_PI_2
}

/// Lower cost bound for the extended state: `nπ/(8√2) + rκ/(2√2)`.
pub fn lower_bound_extended(n: usize, r: usize) -> Result<f64> {
    Ok(lower_bound_point_pair(n)? + r as f64 * kappa(r)? / SQRT8)
}

/// Cost of the constructive point-pair trajectory: `(n-1)π + π/(2√2)`.
pub fn point_pair_constructive_cost(n: usize) -> f64 {
    (n as f64 - 1.0) * PI + PI / (2.0 * SQRT_2)
}

/// Cost of the constructive extended trajectory:
/// `(n-1)π + π/(2√2) + 2λ(r)·r`.
pub fn extended_constructive_cost(n: usize, r: usize) -> Result<f64> {
    Ok(point_pair_constructive_cost(n) + 2.0 * lambda(r)? * r as f64)
}

/// The entangled point pair at distance `n`:
/// `(|down,down⟩ + |up,up⟩)/√2` with particles at sites 0 and `n`.
pub fn omega_state(geometry: &LatticeGeometry, n: usize) -> Result<StateVector> {
    check_chain_span(geometry, n + 1)?;
    let vac = vacuum_state(geometry);
    let down = apply_creation(&apply_creation(&vac, 0, Spin::Down), n, Spin::Down);
    let up = apply_creation(&apply_creation(&vac, 0, Spin::Up), n, Spin::Up);
    Ok(down.add(&up).scaled(C64::new(1.0 / SQRT_2, 0.0)))
}

/// The extended variant: the second particle is spread uniformly over
/// sites `n..n+r`.
pub fn omega_extended_state(
    geometry: &LatticeGeometry,
    n: usize,
    r: usize,
) -> Result<StateVector> {
    if r < 2 {
        return Err(Error::domain("width must be at least 2"));
    }
    check_chain_span(geometry, n + r)?;
    let vac = vacuum_state(geometry);
    let w = C64::new(1.0 / (2.0 * r as f64).sqrt(), 0.0);
    let mut out: Option<StateVector> = None;
    for spin in Spin::BOTH {
        for x in n..n + r {
            let piece =
                apply_creation(&apply_creation(&vac, 0, spin), x, spin).scaled(w);
            out = Some(match out {
                None => piece,
                Some(acc) => acc.add(&piece),
            });
        }
    }
    Ok(out.expect("nonempty sum"))
}

/// The product start state for the constructive trajectories: two spin-up
/// particles on adjacent sites 0 and 1.
pub fn point_pair_start(geometry: &LatticeGeometry) -> Result<StateVector> {
    check_chain_span(geometry, 2)?;
    build_product_state(
        geometry,
        &[
            Packet::localized(geometry, 0, Spin::Up),
            Packet::localized(geometry, 1, Spin::Up),
        ],
    )
}

fn check_chain_span(geometry: &LatticeGeometry, sites_needed: usize) -> Result<()> {
    if !geometry.is_chain() {
        return Err(Error::domain("constructive trajectories live on chains"));
    }
    if geometry.num_sites() < sites_needed {
        return Err(Error::domain(format!(
            "lattice too small: needs {sites_needed} sites, has {}",
            geometry.num_sites()
        )));
    }
    Ok(())
}

fn local_index(a: SiteOccLocal, b: SiteOccLocal) -> usize {
    4 * a as usize + b as usize
}

#[derive(Clone, Copy)]
enum SiteOccLocal {
    Empty = 0,
    Up = 1,
    Down = 2,
}

/// Pair generator rotating `|down,down⟩ ↔ |up,up⟩` on its two sites,
/// `-i(|dd⟩⟨uu| - |uu⟩⟨dd|)`; operator-space norm `√2`.
pub fn pair_spin_flip_generator() -> CMat {
    use SiteOccLocal::*;
    let mut m = CMat::zeros(16, 16);
    let a = local_index(Down, Down);
    let b = local_index(Up, Up);
    m[(a, b)] = C64::new(0.0, -1.0);
    m[(b, a)] = C64::new(0.0, 1.0);
    m
}

/// Pair generator hopping one particle of either spin from the first site
/// to the second, `-i(|0,s⟩⟨s,0| - |s,0⟩⟨0,s|)` summed over both spins;
/// operator-space norm `2`.
pub fn pair_transport_generator() -> CMat {
    use SiteOccLocal::*;
    let mut m = CMat::zeros(16, 16);
    for s in [Up, Down] {
        let a = local_index(Empty, s);
        let b = local_index(s, Empty);
        m[(a, b)] = C64::new(0.0, -1.0);
        m[(b, a)] = C64::new(0.0, 1.0);
    }
    m
}

/// One rotation step `exp(+i θ g)` on a nearest-neighbor pair, expressed
/// as a trajectory segment `(duration, field)` for the `exp(-i Δt k̂)`
/// evolution convention.
fn rotation_step(
    geometry: &LatticeGeometry,
    x: usize,
    theta: f64,
    g: &CMat,
    target_norm: f64,
) -> Result<(f64, ControlField)> {
    let mut field = ControlField::zero(geometry);
    // duration ∝ θ·‖g‖ gives a uniform-speed schedule after normalization.
    let duration = theta * target_norm;
    field.set_g(x, x + 1, g * C64::new(-theta / duration, 0.0))?;
    Ok((duration, field))
}

/// The constructive trajectory from the adjacent product start to the
/// point pair at distance `n`: one `π/4` spin-flip rotation on sites
/// `(0,1)`, then `π/2` transport steps walking the second particle out to
/// site `n`. Cost `(n-1)π + π/(2√2)`.
pub fn build_point_pair_trajectory(
    geometry: &LatticeGeometry,
    n: usize,
) -> Result<ControlTrajectory> {
    if n < 2 {
        return Err(Error::domain("point-pair distance must be at least 2"));
    }
    check_chain_span(geometry, n + 1)?;
    let flip = pair_spin_flip_generator();
    let transport = pair_transport_generator();
    let mut steps = vec![rotation_step(geometry, 0, FRAC_PI_4, &flip, SQRT_2)?];
    for i in 1..n {
        steps.push(rotation_step(geometry, i, FRAC_PI_2, &transport, 2.0)?);
    }
    ControlTrajectory::new(steps)
}

/// The constructive trajectory extended by `r-1` partial transport steps
/// with `sin θ_i = √((n+r-i-1)/(n+r-i))`, leaving the second particle
/// spread uniformly over `n..n+r`. Cost `(n-1)π + π/(2√2) + 2λ(r)·r`.
pub fn build_extended_trajectory(
    geometry: &LatticeGeometry,
    n: usize,
    r: usize,
) -> Result<ControlTrajectory> {
    if r < 2 {
        return Err(Error::domain("width must be at least 2"));
    }
    check_chain_span(geometry, n + r)?;
    let base = build_point_pair_trajectory(geometry, n)?;
    let transport = pair_transport_generator();
    let mut steps: Vec<(f64, ControlField)> = base
        .steps()
        .iter()
        .map(|s| (s.duration, s.field.clone()))
        .collect();
    for i in n..n + r - 1 {
        let frac = (n + r - i - 1) as f64 / (n + r - i) as f64;
        let theta = frac.sqrt().asin();
        steps.push(rotation_step(geometry, i, theta, &transport, 2.0)?);
    }
    ControlTrajectory::new(steps)
}
