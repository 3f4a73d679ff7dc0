//! Desynchronization primitives for fully-meshed wireless sensor networks.
//!
//! The crate covers the two reactive-listening schemes with limited
//! listening (DESYNC and inhibitory-coupling pulse-coupled oscillators),
//! closed-form stochastic estimators of how many firing cycles they need to
//! reach fair TDMA, and a continuous-time event-driven simulator used to
//! check those estimators.
//!
//! Module map:
//!
//! - [`phase`], [`params`]: unit-ring arithmetic and the shared parameter model.
//! - [`analytic`]: special functions, coupling-kernel convolutions and the
//!   convergence-iteration estimators.
//! - [`protocols`]: per-node transition functions.
//! - [`sim`]: event-driven engine, batch runner and normality diagnostic.
//! - [`apps`]: bandwidth-under-churn and firing-period calculators.
//! - [`stats`]: descriptive statistics and correlation helpers.

// `!(x > 0.0)` rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod apps;
mod error;
pub mod params;
pub mod phase;
pub mod protocols;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use params::{NoiseModel, Protocol, ProtocolParams};
pub use phase::{phase_add, ring_distance, Phase};
