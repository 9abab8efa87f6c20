//! Simulation kernels for the random singlet phase of a sparsely filled,
//! exponentially coupled XY spin chain.
//!
//! - [`lattice`]: disorder realizations and bare couplings
//! - [`rsrg`]: strong-disorder decimation, nesting, effective couplings
//! - [`flow`]: RG flow equations for the effective-length distribution
//! - [`spinsim`]: exact quantum mechanics at small atom number
//! - [`sweep`]: adiabatic preparation dynamics and Landau–Zener scaling
//! - [`fidelity`]: experimental error budget for the paired fraction
//! - [`ensemble`]: seeded, parallel disorder averaging

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ensemble;
pub mod error;
pub mod fidelity;
pub mod flow;
pub mod lattice;
pub mod rsrg;
pub mod spinsim;
pub mod sweep;

pub use error::{Error, Result};
pub use lattice::{AtomChain, CouplingMatrix, Filling, LatticeParams};
pub use rsrg::{Bond, EffectiveBond, PairingReport};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
