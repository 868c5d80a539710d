//! Sampling over a loop-cutset.
//!
//! With `Z = C ∪ E` a loop-cutset in topological order, the conditional of
//! each `Z_i` given `z_1..z_{i-1}` is an exact poly-tree query over the
//! relevant subnetwork of the prefix. [`LwlcSampler`] draws the cutset
//! variables from those conditionals and weights by the evidence
//! conditionals; [`lcs_run`] runs Gibbs sampling on the cutset instead.
//! Both estimate non-cutset marginals with the mixing estimator, i.e. the
//! (weighted) average of the exact `P(x_i | c, e)`.

mod lcs;
mod lwlc;

pub use lcs::{lcs_run, LcsSampler};
pub use lwlc::{lwlc_run, lwlc_sample, LwlcSampler};

use alloc::vec::Vec;
use core::ops::Range;

use crate::graphops::{check_prefix_polytrees, prefix_relevant_subnetworks, validate_loop_cutset, Cutset, Subnetwork};
use crate::model::{BayesNet, Evidence, VarId};
use crate::sampling::SamplingError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZKind {
    Cutset,
    /// Observed, with its value.
    Evidence(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderEntry {
    pub var: VarId,
    pub kind: ZKind,
}

/// The evidence positions before a cutset position (or before the end).
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Segment {
    pub(crate) evidence: Range<usize>,
    pub(crate) cutset: Option<usize>,
}

/// `C ∪ E` in topological order with the relevant subnetwork of every
/// prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct CutsetOrder {
    entries: Vec<OrderEntry>,
    prefixes: Vec<Subnetwork>,
    cutset: Cutset,
    evidence: Evidence,
    segments: Vec<Segment>,
}

impl CutsetOrder {
    pub fn entries(&self) -> &[OrderEntry] {
        &self.entries
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.entries.iter().map(|e| e.var)
    }

    /// Relevant subnetwork of `Z_1..Z_i`.
    pub fn prefix(&self, i: usize) -> &Subnetwork {
        &self.prefixes[i]
    }

    pub fn cutset(&self) -> &Cutset {
        &self.cutset
    }

    pub fn evidence(&self) -> &Evidence {
        &self.evidence
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Order positions of the cutset variables.
    pub fn cutset_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.segments.iter().filter_map(|s| s.cutset)
    }

    pub(crate) fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Union of all prefix subnetworks, i.e. the relevant subnetwork of `Z`.
    pub(crate) fn z_mask(&self) -> Option<&[bool]> {
        self.prefixes.last().map(Subnetwork::mask)
    }
}

/// Interleaves `cutset` and the evidence variables in topological order.
pub fn build_cutset_order(net: &BayesNet, evidence: &Evidence, cutset: &Cutset) -> Result<CutsetOrder, SamplingError> {
    evidence.validate(net)?;
    if let Some(&v) = cutset.members().iter().find(|&&v| evidence.contains(v)) {
        return Err(SamplingError::CutsetOverlapsEvidence(v));
    }
    if cutset.members().iter().any(|&v| v >= net.len()) {
        return Err(SamplingError::InvalidCutset);
    }
    let mut z: Vec<VarId> = cutset.members().to_vec();
    z.extend(evidence.vars());
    if !validate_loop_cutset(net, &z) {
        return Err(SamplingError::InvalidCutset);
    }
    let entries: Vec<OrderEntry> = net
        .topological_order()
        .iter()
        .filter_map(|&v| match evidence.get(v) {
            Some(e) => Some(OrderEntry { var: v, kind: ZKind::Evidence(e) }),
            None if cutset.contains(v) => Some(OrderEntry { var: v, kind: ZKind::Cutset }),
            None => None,
        })
        .collect();
    let zs: Vec<VarId> = entries.iter().map(|e| e.var).collect();
    if !check_prefix_polytrees(net, &zs) {
        return Err(SamplingError::InvalidCutset);
    }
    let mut segments = Vec::new();
    let mut start = 0;
    for (i, e) in entries.iter().enumerate() {
        if e.kind == ZKind::Cutset {
            segments.push(Segment {
                evidence: start..i,
                cutset: Some(i),
            });
            start = i + 1;
        }
    }
    segments.push(Segment {
        evidence: start..entries.len(),
        cutset: None,
    });
    Ok(CutsetOrder {
        prefixes: prefix_relevant_subnetworks(net, &zs),
        entries,
        cutset: cutset.clone(),
        evidence: evidence.clone(),
        segments,
    })
}
