//! Residential-burglary hotspot models.
//!
//! Two views of the same dynamics live here:
//!
//! * [`abm`]: the agent-based lattice model (attractiveness `B_s`, criminal
//!   counts `n_s`) with a deterministic mean-field engine and a stochastic one.
//! * [`pde`]: the nondimensional continuum limit, a Keller–Segel type system
//!   for attractiveness `A` and criminal density `rho`, discretized with
//!   bilinear (Q1) finite elements ([`fem`]) and advanced in time with
//!   implicit Euler plus a partitioned fixed-point coupling.
//!
//! [`analysis`] holds hotspot detection, regression fits, burglary-count
//! post-processing and model-to-model comparison.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the command line live in the companion `hotspot` crate.
#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod abm;
pub mod analysis;
pub mod error;
pub mod fem;
pub mod field;
pub mod linsolve;
pub mod mesh;
pub mod params;
pub mod pde;
pub mod profiles;
pub mod rng;

pub use error::{Error, Result};
pub use field::ScalarField;
pub use mesh::{Lattice, Mesh};
pub use params::{Coefficient, DimensionalParams, EquilibriumState, NoiseSpec, NondimParams};
