//! LWLC-BUF: likelihood weighting on a loop-cutset with a search-tree buffer.
//!
//! Every node of the tree is a cutset prefix `c_1..c_k`. It stores what the
//! sampler computes on reaching that prefix: the evidence factors up to the
//! next cutset variable, that variable's conditional, and at full depth the
//! mixing marginals `P(x_i | c, e)`. A fully cached path costs no poly-tree
//! queries at all.
//!
//! When a sample's weight becomes exactly 0 at an evidence variable, the
//! deepest cutset value before it cannot be extended to a tuple of positive
//! probability: only evidence lies between them, and the zero is the exact
//! prefix probability. That value is zeroed in its parent's conditional and
//! the row renormalized; a row left without mass turns its own node into a
//! dead end, one level up. A dead root proves `P(e) = 0`.
//!
//! Samples drawn after a renormalization use the renormalized conditional,
//! and their weights use that same (draw-time) proposal.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::cutset::{CutsetOrder, LwlcSampler};
use crate::exact::Marginals;
use crate::model::BayesNet;
use crate::rng::StreamRng;
use crate::sampling::{drive, Budget, CheckpointEvery, Clock, EstimatorState, RunOutput, SamplingError};

pub type NodeId = usize;

pub(crate) const ROOT: NodeId = 0;

/// A cached conditional together with its dead-end mask. The current
/// distribution is always recomputed from the original values.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedDist {
    original: Vec<f64>,
    current: Vec<f64>,
    dead: Vec<bool>,
    any_dead: bool,
}

impl CachedDist {
    pub fn new(original: Vec<f64>) -> Self {
        CachedDist {
            current: original.clone(),
            dead: alloc::vec![false; original.len()],
            original,
            any_dead: false,
        }
    }

    pub fn original(&self) -> &[f64] {
        &self.original
    }

    /// The distribution sampled from: the original with dead values zeroed,
    /// renormalized.
    pub fn current(&self) -> &[f64] {
        &self.current
    }

    pub fn is_dead(&self, v: usize) -> bool {
        self.dead[v]
    }

    pub fn has_dead_entries(&self) -> bool {
        self.any_dead
    }

    /// True once no value carries mass.
    pub fn is_exhausted(&self) -> bool {
        self.current.iter().all(|&p| p == 0.0)
    }

    fn mark(&mut self, v: usize) {
        self.dead[v] = true;
        self.any_dead = true;
        let mass: f64 = self.original.iter().zip(&self.dead).filter(|(_, &d)| !d).map(|(p, _)| p).sum();
        for ((c, &o), &d) in self.current.iter_mut().zip(&self.original).zip(&self.dead) {
            *c = if d || mass == 0.0 { 0.0 } else { o / mass };
        }
    }

    fn kill(&mut self) {
        self.current.iter_mut().for_each(|c| *c = 0.0);
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Node {
    depth: usize,
    children: BTreeMap<usize, NodeId>,
    pub(crate) evidence_factors: Option<Vec<f64>>,
    pub(crate) dist: Option<CachedDist>,
    pub(crate) mixing: Option<Marginals>,
    dead_end: bool,
    visit_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeadEndOutcome {
    Marked,
    /// The value was already dead; nothing changed.
    AlreadyDead,
    /// The marking reached the root: the evidence is impossible.
    Unsatisfiable,
    /// The parent prefix is not in the tree, so there is nothing to update.
    NotCached,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CacheStats {
    pub nodes: usize,
    /// Distinct full cutset tuples reached.
    pub unique_tuples: usize,
    pub hits: u64,
    pub misses: u64,
    pub dead_ends_marked: u64,
}

impl CacheStats {
    pub fn hit_ratio(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }
}

/// Search tree over cutset prefixes.
#[derive(Debug, Clone)]
pub struct SampleTree {
    nodes: Vec<Node>,
    leaf_depth: usize,
    cap: usize,
    unique_tuples: usize,
    hits: u64,
    misses: u64,
    dead_ends_marked: u64,
    unsatisfiable: bool,
}

impl SampleTree {
    /// A tree for a cutset of `cutset_len` variables holding at most `cap`
    /// nodes (at least the root). Once full it stops growing.
    pub fn new(cutset_len: usize, cap: usize) -> Self {
        SampleTree {
            nodes: alloc::vec![Node::default()],
            leaf_depth: cutset_len,
            cap: cap.max(1),
            unique_tuples: usize::from(cutset_len == 0),
            hits: 0,
            misses: 0,
            dead_ends_marked: 0,
            unsatisfiable: false,
        }
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            nodes: self.nodes.len(),
            unique_tuples: self.unique_tuples,
            hits: self.hits,
            misses: self.misses,
            dead_ends_marked: self.dead_ends_marked,
        }
    }

    pub fn is_unsatisfiable(&self) -> bool {
        self.unsatisfiable
    }

    /// Node of `path`, if stored.
    pub fn find(&self, path: &[usize]) -> Option<NodeId> {
        path.iter().try_fold(ROOT, |id, v| self.nodes[id].children.get(v).copied())
    }

    pub fn dist(&self, path: &[usize]) -> Option<&CachedDist> {
        self.find(path).and_then(|id| self.nodes[id].dist.as_ref())
    }

    pub fn is_dead_end(&self, path: &[usize]) -> bool {
        self.find(path).is_some_and(|id| self.nodes[id].dead_end)
    }

    pub fn visit_count(&self, path: &[usize]) -> u64 {
        self.find(path).map_or(0, |id| self.nodes[id].visit_count)
    }

    /// The conditional stored at `path`, computing and storing it on a
    /// miss. Returns the current (dead-end adjusted) distribution and
    /// whether it was a hit.
    pub fn lookup_or_compute(&mut self, path: &[usize], compute: impl FnOnce() -> Vec<f64>) -> (Vec<f64>, bool) {
        let mut id = Some(ROOT);
        for &v in path {
            id = id.and_then(|id| self.child_or_insert(id, v));
        }
        let Some(id) = id else {
            self.misses += 1;
            return (compute(), false);
        };
        self.visit(id);
        let node = &mut self.nodes[id];
        if let Some(d) = &node.dist {
            self.hits += 1;
            return (d.current.clone(), true);
        }
        self.misses += 1;
        let d = CachedDist::new(compute());
        let out = d.current.clone();
        node.dist = Some(d);
        (out, false)
    }

    /// Zeroes the last value of `path` in its parent's conditional.
    pub fn mark_dead_end(&mut self, path: &[usize]) -> DeadEndOutcome {
        let Some((&v, up)) = path.split_last() else {
            if self.unsatisfiable {
                return DeadEndOutcome::AlreadyDead;
            }
            self.unsatisfiable = true;
            self.dead_ends_marked += 1;
            let root = &mut self.nodes[ROOT];
            root.dead_end = true;
            if let Some(d) = &mut root.dist {
                d.kill();
            }
            return DeadEndOutcome::Unsatisfiable;
        };
        let Some(parent) = self.find(up) else {
            return DeadEndOutcome::NotCached;
        };
        let child = self.nodes[parent].children.get(&v).copied();
        let Some(d) = self.nodes[parent].dist.as_mut() else {
            return DeadEndOutcome::NotCached;
        };
        if d.is_dead(v) {
            return DeadEndOutcome::AlreadyDead;
        }
        d.mark(v);
        let exhausted = d.is_exhausted();
        self.dead_ends_marked += 1;
        if let Some(c) = child {
            let node = &mut self.nodes[c];
            node.dead_end = true;
            if let Some(d) = &mut node.dist {
                d.kill();
            }
        }
        if exhausted {
            match self.mark_dead_end(up) {
                DeadEndOutcome::Unsatisfiable => DeadEndOutcome::Unsatisfiable,
                _ => DeadEndOutcome::Marked,
            }
        } else {
            DeadEndOutcome::Marked
        }
    }

    pub(crate) fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id]
    }

    pub(crate) fn visit(&mut self, id: NodeId) {
        self.nodes[id].visit_count += 1;
    }

    pub(crate) fn record(&mut self, hit: bool) {
        if hit {
            self.hits += 1;
        } else {
            self.misses += 1;
        }
    }

    /// Child of `id` along value `v`, created unless the tree is full.
    pub(crate) fn child_or_insert(&mut self, id: NodeId, v: usize) -> Option<NodeId> {
        if let Some(&c) = self.nodes[id].children.get(&v) {
            return Some(c);
        }
        if self.nodes.len() >= self.cap {
            return None;
        }
        let c = self.nodes.len();
        let depth = self.nodes[id].depth + 1;
        self.nodes.push(Node {
            depth,
            ..Node::default()
        });
        self.nodes[id].children.insert(v, c);
        if depth == self.leaf_depth {
            self.unique_tuples += 1;
        }
        Some(c)
    }
}

/// Options of a buffered run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BufferOptions {
    pub learn_dead_ends: bool,
    /// Node cap of the search tree.
    pub cache_cap: usize,
}

impl Default for BufferOptions {
    fn default() -> Self {
        BufferOptions {
            learn_dead_ends: true,
            cache_cap: 1 << 20,
        }
    }
}

/// LWLC with the search-tree buffer. With learning off the run is sample
/// for sample identical to [`crate::cutset::lwlc_run`] under the same seed.
pub fn lwlc_buf_run(
    net: &BayesNet,
    order: &CutsetOrder,
    budget: Budget,
    every: CheckpointEvery,
    clock: &dyn Clock,
    rng: &mut StreamRng,
    options: BufferOptions,
) -> Result<(RunOutput, CacheStats), SamplingError> {
    let mut s = LwlcSampler::buffered(net, order, options);
    let out = drive(&mut s, EstimatorState::new(net, order.evidence()), budget, every, clock, rng)?;
    let stats = s.cache_stats().unwrap_or_default();
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn miss_then_hit() {
        let mut t = SampleTree::new(2, 100);
        let (d, hit) = t.lookup_or_compute(&[0], || vec![0.25, 0.75]);
        assert!(!hit);
        let (d2, hit) = t.lookup_or_compute(&[0], || panic!("recomputed"));
        assert!(hit);
        assert_eq!(d, d2);
        assert_eq!(t.visit_count(&[0]), 2);
    }

    #[test]
    fn paths_do_not_alias() {
        let mut t = SampleTree::new(2, 100);
        t.lookup_or_compute(&[0], || vec![0.1, 0.9]);
        t.lookup_or_compute(&[1], || vec![0.6, 0.4]);
        t.lookup_or_compute(&[], || vec![0.5, 0.5]);
        assert_eq!(t.dist(&[0]).unwrap().current(), &[0.1, 0.9]);
        assert_eq!(t.dist(&[1]).unwrap().current(), &[0.6, 0.4]);
        assert_eq!(t.dist(&[]).unwrap().current(), &[0.5, 0.5]);
    }

    #[test]
    fn sibling_marking_renormalizes() {
        let mut t = SampleTree::new(2, 100);
        t.lookup_or_compute(&[], || vec![0.5, 0.3, 0.2]);
        t.lookup_or_compute(&[2], || vec![1.0, 0.0]);
        assert_eq!(t.mark_dead_end(&[2]), DeadEndOutcome::Marked);
        assert!(close(t.dist(&[]).unwrap().current(), &[0.625, 0.375, 0.0]));
        let (d, hit) = t.lookup_or_compute(&[], || unreachable!());
        assert!(hit);
        assert!(close(&d, &[0.625, 0.375, 0.0]));
        assert!(t.is_dead_end(&[2]));
        // idempotent
        assert_eq!(t.mark_dead_end(&[2]), DeadEndOutcome::AlreadyDead);
        assert!(close(t.dist(&[]).unwrap().current(), &[0.625, 0.375, 0.0]));
    }

    #[test]
    fn exhausted_row_propagates() {
        let mut t = SampleTree::new(2, 100);
        t.lookup_or_compute(&[], || vec![0.4, 0.6]);
        t.lookup_or_compute(&[1], || vec![1.0, 0.0]);
        assert_eq!(t.mark_dead_end(&[1, 0]), DeadEndOutcome::Marked);
        assert!(t.is_dead_end(&[1]));
        assert!(close(t.dist(&[]).unwrap().current(), &[1.0, 0.0]));
        assert!(t.dist(&[1]).unwrap().is_exhausted());
        assert_eq!(t.stats().dead_ends_marked, 2);
    }

    #[test]
    fn dead_root_means_unsatisfiable() {
        let mut t = SampleTree::new(1, 100);
        t.lookup_or_compute(&[], || vec![0.5, 0.5]);
        assert_eq!(t.mark_dead_end(&[0]), DeadEndOutcome::Marked);
        assert_eq!(t.mark_dead_end(&[1]), DeadEndOutcome::Unsatisfiable);
        assert!(t.is_unsatisfiable());
    }

    #[test]
    fn renormalized_rows_sum_to_one() {
        let mut t = SampleTree::new(1, 100);
        let orig = vec![0.1, 0.2, 0.3, 0.15, 0.25];
        t.lookup_or_compute(&[], || orig.clone());
        for v in [3, 0, 4, 0, 1] {
            t.mark_dead_end(&[v]);
            let s: f64 = t.dist(&[]).unwrap().current().iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        assert_eq!(t.dist(&[]).unwrap().current(), &[0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn cap_stops_growth() {
        let mut t = SampleTree::new(3, 3);
        t.lookup_or_compute(&[0, 0], || vec![0.5, 0.5]);
        assert_eq!(t.stats().nodes, 3);
        let (_, hit) = t.lookup_or_compute(&[1], || vec![0.5, 0.5]);
        assert!(!hit);
        assert_eq!(t.stats().nodes, 3);
        assert!(t.find(&[1]).is_none());
    }
}
