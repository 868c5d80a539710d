//! Exact and message-passing inference.
//!
//! - [`enumerate_joint_query`]: brute-force summation over the joint, the
//!   reference every other engine is checked against
//! - [`bucket_elimination_query`]: variable elimination with a min-fill order
//! - [`polytree_query`]: linear-time sum-product on singly-connected
//!   (after splitting observed variables) networks
//! - [`iterative_bp`]: loopy belief propagation with a flood schedule

mod elimination;
mod enumerate;
mod factor;
mod graph;
mod ibp;
mod polytree;

pub use elimination::{bucket_elimination_query, min_fill_order};
pub use enumerate::{enumerate_joint_query, enumerate_joint_query_with_cap, DEFAULT_STATE_CAP};
pub use factor::Factor;
pub use ibp::{iterative_bp, IbpResult};
pub use polytree::polytree_query;
pub(crate) use polytree::{polytree_conditional, polytree_log_evidence, polytree_marginals};

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::model::{ModelError, VarId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("joint state space of {size} configurations exceeds the cap of {cap}")]
    StateSpaceTooLarge { size: u128, cap: u128 },
    #[error("network is not singly-connected once observed variables are split")]
    NotSinglyConnected,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-variable distributions; `None` for variables without a marginal
/// (observed, or outside the queried subnetwork).
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    dists: Vec<Option<Vec<f64>>>,
}

impl Marginals {
    pub fn new(n: usize) -> Self {
        Marginals { dists: vec![None; n] }
    }

    pub fn from_vec(dists: Vec<Option<Vec<f64>>>) -> Self {
        Marginals { dists }
    }

    /// Number of variable slots (the network size).
    pub fn len(&self) -> usize {
        self.dists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dists.is_empty()
    }

    pub fn get(&self, v: VarId) -> Option<&[f64]> {
        self.dists.get(v).and_then(|d| d.as_deref())
    }

    pub fn set(&mut self, v: VarId, dist: Vec<f64>) {
        self.dists[v] = Some(dist);
    }

    pub fn clear(&mut self, v: VarId) {
        self.dists[v] = None;
    }

    /// Variables that carry a distribution, with the distribution.
    pub fn iter(&self) -> impl Iterator<Item = (VarId, &[f64])> {
        self.dists.iter().enumerate().filter_map(|(v, d)| d.as_deref().map(|d| (v, d)))
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.iter().map(|(v, _)| v)
    }

    /// Largest absolute difference over all shared cells; `None` when the
    /// two tables do not cover the same variables.
    pub fn max_abs_diff(&self, other: &Marginals) -> Option<f64> {
        if self.dists.len() != other.dists.len() {
            return None;
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.dists.iter().zip(&other.dists) {
            match (a, b) {
                (None, None) => {}
                (Some(a), Some(b)) if a.len() == b.len() => {
                    for (x, y) in a.iter().zip(b) {
                        worst = worst.max((x - y).abs());
                    }
                }
                _ => return None,
            }
        }
        Some(worst)
    }
}

/// Answer of an exact (or approximate) query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    /// `P(e)`; may underflow to 0 on large networks, see
    /// `log_evidence_probability`.
    pub evidence_probability: f64,
    pub log_evidence_probability: f64,
    /// Posterior marginals of unobserved variables; `None` when `P(e) = 0`,
    /// where the posterior is undefined.
    pub marginals: Option<Marginals>,
}

impl QueryResult {
    pub(crate) fn from_log(log_pe: f64, marginals: Option<Marginals>) -> Self {
        QueryResult {
            evidence_probability: crate::math::exp(log_pe),
            log_evidence_probability: log_pe,
            marginals: if log_pe == f64::NEG_INFINITY { None } else { marginals },
        }
    }

    pub fn is_defined(&self) -> bool {
        self.marginals.is_some()
    }
}
