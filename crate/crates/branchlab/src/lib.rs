//! Desk-scale numerical laboratory for lattice-fermion state structure.
//!
//! The crate diagonalizes small fixed-particle-number sectors of a spinful
//! fermion lattice and studies how hard it is to disentangle states with
//! nearest-neighbor, number-preserving controls:
//!
//! - [`fock`] — sector bases, creation/annihilation with a frozen sign
//!   convention, product-state construction.
//! - [`opspace`] — the space of local Hermitian controls, its inner product,
//!   sector embeddings, and a Lie-closure reachability check.
//! - [`complexity`] — control trajectories, trajectory cost, Schmidt-spectrum
//!   audits, analytic bounds, constructive trajectories, and a GRAPE-style
//!   cost minimizer.
//! - [`branching`] — the Q functional, the split condition, and search for
//!   Q-minimizing orthogonal branch decompositions.
//! - [`experiments`] — a two-dimensional Stern-Gerlach model on analytic
//!   Gaussian packets and a four-particle Bell correlation model.
//! - [`cli`] — the command-line front end used by the `branchlab` binary.

pub mod branching;
pub mod cli;
pub mod complexity;
pub mod error;
pub mod experiments;
pub mod fock;
pub mod linalg;
pub mod opspace;

pub use error::{Error, Result};
