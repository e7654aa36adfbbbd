//! Disentangling cost of lattice states: piecewise-constant control
//! trajectories, their cost, Schmidt-spectrum audits, analytic bounds with
//! the constructive trajectories that realize them, and a numerical cost
//! minimizer.

pub mod bounds;
pub mod optimize;
pub mod schmidt;

use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{SectorBasis, StateVector};
use crate::linalg::{expi_hermitian, CMat};
use crate::opspace::{embed, ControlField};

/// One piecewise-constant segment of a control schedule.
#[derive(Debug, Clone)]
pub struct TrajectoryStep {
    pub duration: f64,
    pub field: ControlField,
}

/// A piecewise-constant control schedule with total duration 1.
///
/// Construction rescales durations to sum to one while scaling each field
/// inversely, which changes neither the endpoint unitary nor the cost
/// (both depend only on the per-step products `Δt·k`).
#[derive(Debug, Clone)]
pub struct ControlTrajectory {
    steps: Vec<TrajectoryStep>,
}

impl ControlTrajectory {
    /// The identity schedule.
    pub fn empty() -> ControlTrajectory {
        ControlTrajectory { steps: Vec::new() }
    }

    pub fn new(raw: Vec<(f64, ControlField)>) -> Result<ControlTrajectory> {
        let total: f64 = raw.iter().map(|(dt, _)| *dt).sum();
        if raw.iter().any(|(dt, _)| *dt <= 0.0) {
            return Err(Error::domain("step durations must be positive"));
        }
        if raw.is_empty() {
            return Ok(ControlTrajectory::empty());
        }
        let steps = raw
            .into_iter()
            .map(|(dt, field)| TrajectoryStep {
                duration: dt / total,
                field: field.scaled(total),
            })
            .collect();
        Ok(ControlTrajectory { steps })
    }

    pub fn steps(&self) -> &[TrajectoryStep] {
        &self.steps
    }

    /// Time-integrated field norm `Σ Δt‖k‖`.
    pub fn cost(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.duration * s.field.norm())
            .sum()
    }

    /// The same schedule with every step split into `m` equal substeps.
    pub fn subdivided(&self, m: usize) -> ControlTrajectory {
        assert!(m >= 1);
        let steps = self
            .steps
            .iter()
            .flat_map(|s| {
                std::iter::repeat_with(move || TrajectoryStep {
                    duration: s.duration / m as f64,
                    field: s.field.clone(),
                })
                .take(m)
            })
            .collect();
        ControlTrajectory { steps }
    }
}

/// Apply the schedule to a state: `exp(-i Δt k̂)` per step, in order.
///
/// The output is renormalized (drift is bounded at 1e-10 per application)
/// and never carries a product certificate.
pub fn evolve(traj: &ControlTrajectory, psi0: &StateVector) -> StateVector {
    let sector = psi0.sector().clone();
    let mut amps = psi0.amplitudes().clone();
    let scale = psi0.norm();
    for step in &traj.steps {
        let h = embed(&step.field, &sector);
        let u = expi_hermitian(&h, step.duration);
        amps = u * amps;
        let n = amps.norm();
        debug_assert!((n - scale).abs() < 1e-10 * scale.max(1.0));
        amps *= C64::new(scale / n, 0.0);
    }
    StateVector::from_amplitudes(sector, amps)
}

/// Propagator of a full schedule on one sector.
pub fn propagator(traj: &ControlTrajectory, sector: &Arc<SectorBasis>) -> CMat {
    let d = sector.dim();
    let mut u = CMat::identity(d, d);
    for step in &traj.steps {
        let h = embed(&step.field, sector);
        u = expi_hermitian(&h, step.duration) * u;
    }
    u
}

/// Two-sided complexity estimate with the trajectory that witnesses the
/// upper value.
#[derive(Debug, Clone)]
pub struct ComplexityEstimate {
    pub lower: f64,
    pub upper: f64,
    pub witness: ControlTrajectory,
    pub method: Vec<String>,
    pub converged: bool,
}

impl ComplexityEstimate {
    pub fn new(
        lower: f64,
        upper: f64,
        witness: ControlTrajectory,
        method: Vec<String>,
        converged: bool,
    ) -> Result<ComplexityEstimate> {
        if lower > upper + 1e-9 {
            return Err(Error::non_converged(format!(
                "inconsistent estimate: lower {lower} exceeds upper {upper}"
            )));
        }
        Ok(ComplexityEstimate {
            lower,
            upper,
            witness,
            method,
            converged,
        })
    }
}
