//! A two-dimensional Stern-Gerlach model on analytic Gaussian packets.
//!
//! Two particles start in a spin-entangled pair of counter-moving packets.
//! At the impulse time the spin-up component of particle 0 receives
//! transverse momentum `+r` and the spin-down component `-r`, so the two
//! spin components separate along y at rate `2r/m` while their separation
//! dispersion grows as `t/(d·m·√2)`. The branch threshold is crossed when
//! a linear complexity surrogate — the point-pair rate applied to the
//! separation in lattice units — exceeds `b`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::Spin;

use super::packet::GaussianPacket2D;

/// Model parameters.
#[derive(Debug, Clone, Serialize)]
pub struct SternGerlachConfig {
    /// Longitudinal momentum of the pair.
    pub q: f64,
    /// Initial longitudinal offset (particle 0 at +w, particle 1 at -w).
    pub w: f64,
    /// Initial packet dispersion.
    pub d: f64,
    /// Particle mass.
    pub m: f64,
    /// Transverse momentum impulse `r` on particle 0.
    pub impulse: f64,
    /// Impulse time `t1`.
    pub t_impulse: f64,
    /// Branching threshold (complexity units).
    pub b: f64,
    /// Candidate branching times (increasing, after the impulse).
    pub t_out_schedule: Vec<f64>,
    /// Lattice spacing converting separation lengths to site distances.
    pub lattice_spacing: f64,
}

impl SternGerlachConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("q", self.q),
            ("w", self.w),
            ("d", self.d),
            ("m", self.m),
            ("impulse", self.impulse),
            ("b", self.b),
            ("lattice-spacing", self.lattice_spacing),
        ] {
            if v <= 0.0 {
                return Err(Error::domain(format!("{name} must be positive")));
            }
        }
        if self.t_out_schedule.is_empty() {
            return Err(Error::domain("empty t_out schedule"));
        }
        if self.t_out_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("t_out schedule must be increasing"));
        }
        if self.t_out_schedule[0] <= self.t_impulse {
            return Err(Error::domain("schedule must start after the impulse"));
        }
        Ok(())
    }
}

/// One branch: definite spins for both particles and their packets.
#[derive(Debug, Clone, Serialize)]
pub struct SternGerlachBranch {
    pub spin0: i32,
    pub spin1: i32,
    /// Real amplitude sign carried by the component (±1/√2).
    pub amplitude: f64,
    pub weight: f64,
    pub packet0: GaussianPacket2D,
    pub packet1: GaussianPacket2D,
}

#[derive(Debug, Clone, Serialize)]
pub struct SternGerlachReport {
    /// Whether the impulse beats the momentum dispersion (`r > 1/(2√2 d)`).
    pub separated: bool,
    pub branched: bool,
    /// First schedule time at which the surrogate exceeded `b`.
    pub t_branch: Option<f64>,
    /// Mean separation growth rate `2r/m`.
    pub separation_rate: f64,
    /// Asymptotic separation-dispersion growth rate `1/(d·m·√2)`.
    pub dispersion_rate: f64,
    /// `(t, separation, surrogate complexity)` per schedule point.
    pub surrogate_trace: Vec<(f64, f64, f64)>,
    /// Branches at the last schedule point (two, weight 1/2 each).
    pub branches: Vec<SternGerlachBranch>,
    /// The same ensemble translated back to the initial time.
    pub pulled_back: Vec<SternGerlachBranch>,
}

/// Complete-separation condition on the impulse: `r > 1/(2√2·d)`.
pub fn separation_condition(r: f64, d: f64) -> bool {
    r > 1.0 / (2.0 * std::f64::consts::SQRT_2 * d)
}

/// Mean separation of the two spin components of particle 0 at time `t`.
pub fn component_separation(cfg: &SternGerlachConfig, t: f64) -> f64 {
    if t <= cfg.t_impulse {
        0.0
    } else {
        2.0 * cfg.impulse * (t - cfg.t_impulse) / cfg.m
    }
}

/// Dispersion of the separation coordinate at time `t` (difference of two
/// independent packets: √2 times the single-packet dispersion).
pub fn separation_dispersion(cfg: &SternGerlachConfig, t: f64) -> f64 {
    let single = GaussianPacket2D::new((0.0, 0.0), (0.0, 0.0), cfg.d, cfg.m);
    std::f64::consts::SQRT_2 * single.y.dispersion(t)
}

/// Linear complexity surrogate: the point-pair lower-bound rate applied to
/// the separation measured in lattice units.
pub fn complexity_surrogate(cfg: &SternGerlachConfig, t: f64) -> f64 {
    let sites = component_separation(cfg, t) / cfg.lattice_spacing;
    sites * std::f64::consts::PI / (8.0 * std::f64::consts::SQRT_2)
}

fn branch_pair(cfg: &SternGerlachConfig, with_impulse: bool) -> Vec<SternGerlachBranch> {
    // Spin-up component of particle 0: +r kick, entangled partner is down.
    let kick = |spin: Spin| -> GaussianPacket2D {
        let sgn = spin.value() as f64;
        if with_impulse {
            GaussianPacket2D::new(
                (cfg.q, sgn * cfg.impulse),
                (cfg.w, -sgn * cfg.impulse * cfg.t_impulse / cfg.m),
                cfg.d,
                cfg.m,
            )
        } else {
            GaussianPacket2D::new((cfg.q, 0.0), (cfg.w, 0.0), cfg.d, cfg.m)
        }
    };
    let partner = GaussianPacket2D::new((-cfg.q, 0.0), (-cfg.w, 0.0), cfg.d, cfg.m);
    vec![
        SternGerlachBranch {
            spin0: 1,
            spin1: -1,
            amplitude: std::f64::consts::FRAC_1_SQRT_2,
            weight: 0.5,
            packet0: kick(Spin::Up),
            packet1: partner,
        },
        SternGerlachBranch {
            spin0: -1,
            spin1: 1,
            amplitude: -std::f64::consts::FRAC_1_SQRT_2,
            weight: 0.5,
            packet0: kick(Spin::Down),
            packet1: partner,
        },
    ]
}

/// Run the model: evolve the two-component state analytically, track the
/// complexity surrogate across the schedule, and report the branch ensemble
/// with its pullback to the initial time.
pub fn stern_gerlach_run(cfg: &SternGerlachConfig) -> Result<SternGerlachReport> {
    cfg.validate()?;
    let separated = separation_condition(cfg.impulse, cfg.d);
    let mut surrogate_trace = Vec::new();
    let mut t_branch = None;
    for &t in &cfg.t_out_schedule {
        let sep = component_separation(cfg, t);
        let c = complexity_surrogate(cfg, t);
        if separated && t_branch.is_none() && c > cfg.b {
            t_branch = Some(t);
        }
        surrogate_trace.push((t, sep, c));
    }
    let branched = t_branch.is_some();
    Ok(SternGerlachReport {
        separated,
        branched,
        t_branch,
        separation_rate: 2.0 * cfg.impulse / cfg.m,
        dispersion_rate: 1.0 / (cfg.d * cfg.m * std::f64::consts::SQRT_2),
        surrogate_trace,
        branches: if branched {
            branch_pair(cfg, true)
        } else {
            Vec::new()
        },
        pulled_back: if branched {
            branch_pair(cfg, false)
        } else {
            Vec::new()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> SternGerlachConfig {
        SternGerlachConfig {
            q: 4.0,
            w: 10.0,
            d: 1.0,
            m: 1.0,
            impulse: 2.0,
            t_impulse: 1.0,
            b: 1.0,
            t_out_schedule: vec![2.0, 4.0, 8.0, 16.0],
            lattice_spacing: 0.5,
        }
    }

    #[test]
    fn separation_condition_examples() {
        // r = 1/d clears the bound, the exact boundary does not (strict).
        assert!(separation_condition(1.0, 1.0));
        let boundary = 1.0 / (2.0 * std::f64::consts::SQRT_2 * 1.0);
        assert!(!separation_condition(boundary, 1.0));
        // Scaling (r, d) -> (r/2, 2d) preserves the product and the flag.
        assert_eq!(
            separation_condition(0.8, 0.7),
            separation_condition(0.4, 1.4)
        );
    }

    #[test]
    fn two_even_branches_when_separated() {
        let report = stern_gerlach_run(&config()).unwrap();
        assert!(report.separated);
        assert!(report.branched);
        assert_eq!(report.branches.len(), 2);
        for b in &report.branches {
            assert_eq!(b.weight, 0.5);
        }
        assert_eq!(report.branches[0].spin0, 1);
        assert_eq!(report.branches[1].spin0, -1);
        // Opposite-sign amplitudes of equal magnitude.
        assert!(
            (report.branches[0].amplitude + report.branches[1].amplitude).abs() < 1e-15
        );
    }

    #[test]
    fn separation_grows_at_2r_over_m() {
        let cfg = config();
        let report = stern_gerlach_run(&cfg).unwrap();
        assert!((report.separation_rate - 2.0 * cfg.impulse / cfg.m).abs() < 1e-15);
        for &(t, sep, _) in &report.surrogate_trace {
            let expected = 2.0 * cfg.impulse * (t - cfg.t_impulse) / cfg.m;
            assert!((sep - expected).abs() < 1e-12);
        }
        // Branch packets realize the same mean separation.
        let b = &report.branches;
        for &(t, sep, _) in &report.surrogate_trace {
            let y0 = b[0].packet0.y.mean(t);
            let y1 = b[1].packet0.y.mean(t);
            assert!((y0 - y1 - sep).abs() < 1e-10, "at t={t}");
        }
    }

    #[test]
    fn separation_dispersion_matches_packet_dispersion() {
        let cfg = config();
        for t in [0.5, 2.0, 10.0, 100.0] {
            let direct = separation_dispersion(&cfg, t);
            let var = t * t / (4.0 * cfg.d * cfg.d * cfg.m * cfg.m) + cfg.d * cfg.d;
            assert!((direct - (2.0 * var).sqrt()).abs() < 1e-12);
        }
        // Asymptotic rate t/(d·m·√2).
        let t = 1e8;
        let asymptote = t / (cfg.d * cfg.m * std::f64::consts::SQRT_2);
        assert!((separation_dispersion(&cfg, t) / asymptote - 1.0).abs() < 1e-10);
    }

    #[test]
    fn weak_impulse_reports_no_branching() {
        let mut cfg = config();
        cfg.impulse = 1.0 / (2.0 * std::f64::consts::SQRT_2 * cfg.d);
        let report = stern_gerlach_run(&cfg).unwrap();
        assert!(!report.separated);
        assert!(!report.branched);
        assert!(report.branches.is_empty());
    }

    #[test]
    fn pulled_back_packets_lose_the_kick() {
        let report = stern_gerlach_run(&config()).unwrap();
        for pb in &report.pulled_back {
            assert_eq!(pb.packet0.y.k, 0.0);
            assert_eq!(pb.packet0.y.z_in, 0.0);
        }
        // Signs persist in the pullback.
        assert!(report.pulled_back[0].amplitude > 0.0);
        assert!(report.pulled_back[1].amplitude < 0.0);
    }
}
