//! Inference over discrete Bayesian networks with likelihood weighting
//! restricted to a loop-cutset.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation: network representation, graph algorithms, exact engines,
//! samplers and the evaluation metrics. File formats, wall-clock timing and
//! the command-line front end live in the `lwlc` crate.
//!
//! Module map:
//!
//! - [`model`]: variables, CPTs, evidence, random network generation
//! - [`graphops`]: topological order, relevant subnetworks, loop-cutsets
//! - [`exact`]: joint enumeration, bucket elimination, poly-tree queries, IBP
//! - [`sampling`]: full likelihood weighting, Gibbs, weighted estimators
//! - [`cutset`]: likelihood weighting and Gibbs sampling over a loop-cutset
//! - [`cache`]: the search-tree buffer with dead-end learning
//! - [`eval`]: MSE, KL distance, exact weight variances, traces
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod cache;
pub mod cutset;
pub mod eval;
pub mod exact;
pub mod graphops;
pub mod model;
pub mod rng;
pub mod sampling;

mod math;

pub use model::{BayesNet, Cpt, Evidence, ModelError, VarId, Variable};
