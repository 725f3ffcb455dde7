//! Monte Carlo laboratory for Gaussian multiplicative chaos on Wiener space.
//!
//! The crate builds the renormalized GMC measure over Brownian paths in a
//! mollified space-time white noise and measures its geometry: tube-volume
//! decay against Dirichlet eigenvalue rates, thick-path averages, free-energy
//! decompositions, Malliavin/OU-flow bounds, replica-overlap localization and
//! the stochastic-heat-equation scaling identity.
//!
//! Everything is deterministic given (config, seed): noise cells and path
//! increments are counter-addressed, and all parallel reductions run in fixed
//! index order.

// `!(x > 0.0)` is the NaN-rejecting form of positivity validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod gmc;
pub mod kernel;
pub mod malliavin;
mod math;
pub mod noise;
pub mod overlap;
pub mod paths;
pub mod report;
pub mod rng;
pub mod she;
pub mod spectrum;

pub use error::{Error, Result};
