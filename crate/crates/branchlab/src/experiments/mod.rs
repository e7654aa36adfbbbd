//! The two worked measurement models: a two-dimensional Stern-Gerlach
//! experiment on analytic Gaussian packets and a one-dimensional
//! four-particle Bell correlation experiment with replica sampling.

pub mod bell;
pub mod packet;
pub mod stern_gerlach;

pub use bell::{
    bell_ensemble, bell_single, bell_state_check, BellConfig, BellOutcome, Outcome,
};
pub use packet::{GaussianPacket, GaussianPacket2D};
pub use stern_gerlach::{
    separation_condition, stern_gerlach_run, SternGerlachConfig, SternGerlachReport,
};
