//! Graph algorithms over the network structure: ordering, relevant
//! subnetworks, singly-connectedness and loop-cutsets.
//!
//! Observed (or sampled) variables are handled by *splitting*: a split
//! variable keeps its incoming edges, while each outgoing edge is re-attached
//! to a private parentless clone. The clone is a leaf of the skeleton, so in
//! practice a split variable simply stops linking its children to the rest of
//! the graph. A loop therefore survives splitting exactly when every split
//! variable on it is a sink of that loop.

use alloc::vec;
use alloc::vec::Vec;

use crate::model::{BayesNet, VarId};

/// Topological order of the network, ties broken by ascending id.
///
/// A [`BayesNet`] is validated acyclic on construction, so this cannot fail.
pub fn topological_order(net: &BayesNet) -> Vec<VarId> {
    net.topological_order().to_vec()
}

/// Variables kept after iteratively deleting barren variables with respect
/// to a target set: the targets together with all of their ancestors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subnetwork {
    kept: Vec<bool>,
    members: Vec<VarId>,
}

impl Subnetwork {
    pub fn full(net: &BayesNet) -> Self {
        Subnetwork {
            kept: vec![true; net.len()],
            members: (0..net.len()).collect(),
        }
    }

    pub(crate) fn from_mask(kept: Vec<bool>) -> Self {
        let members = kept.iter().enumerate().filter(|(_, &k)| k).map(|(v, _)| v).collect();
        Subnetwork { kept, members }
    }

    #[inline]
    pub fn contains(&self, v: VarId) -> bool {
        self.kept.get(v).copied().unwrap_or(false)
    }

    /// Kept variables in ascending id order.
    pub fn members(&self) -> &[VarId] {
        &self.members
    }

    pub fn mask(&self) -> &[bool] {
        &self.kept
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

pub fn relevant_subnetwork(net: &BayesNet, targets: &[VarId]) -> Subnetwork {
    let mut kept = vec![false; net.len()];
    let mut stack: Vec<VarId> = Vec::new();
    add_ancestors(net, targets, &mut kept, &mut stack);
    Subnetwork::from_mask(kept)
}

fn add_ancestors(net: &BayesNet, targets: &[VarId], kept: &mut [bool], stack: &mut Vec<VarId>) {
    for &t in targets {
        if !kept[t] {
            kept[t] = true;
            stack.push(t);
        }
    }
    while let Some(v) = stack.pop() {
        for &p in net.parents(v) {
            if !kept[p] {
                kept[p] = true;
                stack.push(p);
            }
        }
    }
}

/// Relevant subnetworks of every prefix `z[..=j]`, built incrementally.
pub fn prefix_relevant_subnetworks(net: &BayesNet, z: &[VarId]) -> Vec<Subnetwork> {
    let mut kept = vec![false; net.len()];
    let mut stack = Vec::new();
    let mut out = Vec::with_capacity(z.len());
    for &v in z {
        add_ancestors(net, &[v], &mut kept, &mut stack);
        out.push(Subnetwork::from_mask(kept.clone()));
    }
    out
}

/// Disjoint-set forest over variable ids.
pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    /// Joins the sets of `a` and `b`; false when they were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// True iff the skeleton restricted to `within` (default: whole network),
/// after splitting the variables flagged in `split`, is a forest.
pub fn is_forest_after_split(net: &BayesNet, within: Option<&[bool]>, split: &[bool]) -> bool {
    let keep = |v: VarId| within.is_none_or(|m| m[v]);
    let mut uf = UnionFind::new(net.len());
    for c in 0..net.len() {
        if !keep(c) {
            continue;
        }
        for &p in net.parents(c) {
            if !keep(p) || split[p] {
                continue;
            }
            if !uf.union(p, c) {
                return false;
            }
        }
    }
    true
}

/// True iff the undirected skeleton (optionally of a subnetwork) is a forest.
pub fn is_singly_connected(net: &BayesNet, within: Option<&Subnetwork>) -> bool {
    is_forest_after_split(net, within.map(Subnetwork::mask), &vec![false; net.len()])
}

/// True iff `z` contains an allowed vertex of every loop, i.e. the graph with
/// every member of `z` split is singly-connected.
pub fn validate_loop_cutset(net: &BayesNet, z: &[VarId]) -> bool {
    let mut split = vec![false; net.len()];
    for &v in z {
        split[v] = true;
    }
    is_forest_after_split(net, None, &split)
}

/// A loop-cutset: members in ascending id order, disjoint from the evidence
/// it was built for.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Cutset {
    members: Vec<VarId>,
}

impl Cutset {
    pub fn new(mut members: Vec<VarId>) -> Self {
        members.sort_unstable();
        members.dedup();
        Cutset { members }
    }

    pub fn members(&self) -> &[VarId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.members.binary_search(&v).is_ok()
    }
}

/// Greedy loop-cutset search.
///
/// The `observed` variables are split up front. Then, repeatedly: peel
/// skeleton vertices of degree at most one; if nothing is left the split
/// graph is a forest. Otherwise split the remaining vertex of largest degree
/// among those with an outgoing edge into the remaining graph (lowest id on
/// ties) and add it to the cutset.
pub fn find_loop_cutset(net: &BayesNet, observed: &[VarId]) -> Cutset {
    let n = net.len();
    let mut split = vec![false; n];
    for &v in observed {
        split[v] = true;
    }
    let mut members = Vec::new();
    loop {
        let alive = two_core(net, &split);
        let mut best: Option<(usize, VarId)> = None;
        for v in 0..n {
            if !alive[v] || split[v] {
                continue;
            }
            if !net.children(v).iter().any(|&c| alive[c]) {
                continue;
            }
            let deg = live_degree(net, &split, &alive, v);
            if best.is_none_or(|(d, _)| deg > d) {
                best = Some((deg, v));
            }
        }
        match best {
            Some((_, v)) => {
                split[v] = true;
                members.push(v);
            }
            None => break,
        }
    }
    Cutset::new(members)
}

fn live_degree(net: &BayesNet, split: &[bool], alive: &[bool], v: VarId) -> usize {
    let up = net.parents(v).iter().filter(|&&p| alive[p] && !split[p]).count();
    let down = if split[v] {
        0
    } else {
        net.children(v).iter().filter(|&&c| alive[c]).count()
    };
    up + down
}

/// Vertices of the split skeleton that survive repeated removal of vertices
/// with degree at most one.
fn two_core(net: &BayesNet, split: &[bool]) -> Vec<bool> {
    let n = net.len();
    let mut alive = vec![true; n];
    let mut deg: Vec<usize> = (0..n).map(|v| live_degree(net, split, &alive, v)).collect();
    let mut stack: Vec<VarId> = (0..n).filter(|&v| deg[v] <= 1).collect();
    while let Some(v) = stack.pop() {
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        let touch = |u: VarId, deg: &mut [usize], stack: &mut Vec<VarId>| {
            if alive[u] {
                deg[u] -= 1;
                if deg[u] == 1 {
                    stack.push(u);
                }
            }
        };
        for &p in net.parents(v) {
            if !split[p] {
                touch(p, &mut deg, &mut stack);
            }
        }
        if !split[v] {
            for &c in net.children(v) {
                touch(c, &mut deg, &mut stack);
            }
        }
    }
    alive
}

/// For every prefix `z[..=j]`, checks that the relevant subnetwork of the
/// prefix is singly-connected once `z[..j]` are split.
pub fn check_prefix_polytrees(net: &BayesNet, z: &[VarId]) -> bool {
    let mut split = vec![false; net.len()];
    for (j, sub) in prefix_relevant_subnetworks(net, z).iter().enumerate() {
        if !is_forest_after_split(net, Some(sub.mask()), &split) {
            return false;
        }
        split[z[j]] = true;
    }
    true
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::{Cpt, GeneratorConfig, Variable};
    use alloc::format;

    /// Binary network with the given parent lists and uniform CPTs.
    pub(crate) fn structure(parents: &[&[VarId]]) -> BayesNet {
        let vars = (0..parents.len()).map(|i| Variable::with_card(format!("V{i}"), 2)).collect();
        let cpts = parents
            .iter()
            .enumerate()
            .map(|(i, ps)| Cpt::new(i, ps.to_vec(), vec![vec![0.5, 0.5]; 1 << ps.len()]))
            .collect();
        BayesNet::new(vars, cpts).unwrap()
    }

    // A=0, B=1, C=2, D=3
    pub(crate) fn diamond() -> BayesNet {
        structure(&[&[], &[0], &[0], &[1, 2]])
    }

    fn chain3() -> BayesNet {
        structure(&[&[], &[0], &[1]])
    }

    #[test]
    fn topo_orders() {
        assert_eq!(topological_order(&chain3()), vec![0, 1, 2]);
        // edges 2->0 and 2->1 force 2 first, then ascending ids
        let net = structure(&[&[2], &[2], &[]]);
        assert_eq!(topological_order(&net), vec![2, 0, 1]);
        assert_eq!(topological_order(&structure(&[&[], &[], &[]])), vec![0, 1, 2]);
        let d = topological_order(&diamond());
        assert_eq!(d.first(), Some(&0));
        assert_eq!(d.last(), Some(&3));
    }

    #[test]
    fn relevant_subnetworks() {
        assert_eq!(relevant_subnetwork(&chain3(), &[1]).members(), &[0, 1]);
        assert_eq!(relevant_subnetwork(&chain3(), &[0, 1, 2]).members(), &[0, 1, 2]);
        assert_eq!(relevant_subnetwork(&diamond(), &[1]).members(), &[0, 1]);
    }

    #[test]
    fn singly_connected() {
        assert!(is_singly_connected(&chain3(), None));
        assert!(!is_singly_connected(&diamond(), None));
        assert!(is_singly_connected(&BayesNet::empty(), None));
        let sub = relevant_subnetwork(&diamond(), &[1, 2]);
        assert!(is_singly_connected(&diamond(), Some(&sub)));
    }

    #[test]
    fn loop_cutset_validation() {
        let d = diamond();
        assert!(validate_loop_cutset(&d, &[0]));
        assert!(validate_loop_cutset(&d, &[1]));
        assert!(validate_loop_cutset(&d, &[2]));
        assert!(!validate_loop_cutset(&d, &[3]));
        assert!(validate_loop_cutset(&chain3(), &[]));
    }

    #[test]
    fn found_cutsets() {
        assert!(find_loop_cutset(&chain3(), &[]).is_empty());
        let c = find_loop_cutset(&diamond(), &[]);
        assert_eq!(c.len(), 1);
        assert!(c.members()[0] < 3);
        assert!(validate_loop_cutset(&diamond(), c.members()));
        // two disjoint diamonds
        let two = structure(&[&[], &[0], &[0], &[1, 2], &[], &[4], &[4], &[5, 6]]);
        let c = find_loop_cutset(&two, &[]);
        assert_eq!(c.len(), 2);
        assert!(c.members()[0] < 3 && (4..7).contains(&c.members()[1]));
        // observing B breaks the only loop
        assert!(find_loop_cutset(&diamond(), &[1]).is_empty());
    }

    #[test]
    fn prefix_polytrees() {
        let d = diamond();
        assert!(check_prefix_polytrees(&d, &[0, 3]));
        assert!(!check_prefix_polytrees(&d, &[3]));
        assert!(check_prefix_polytrees(&chain3(), &[2]));
        assert!(check_prefix_polytrees(&chain3(), &[0, 1, 2]));
    }

    /// All simple cycles of the undirected skeleton, as vertex sequences.
    pub(crate) fn skeleton_loops(net: &BayesNet) -> Vec<Vec<VarId>> {
        let n = net.len();
        let mut adj = vec![Vec::new(); n];
        for c in 0..n {
            for &p in net.parents(c) {
                adj[p].push(c);
                adj[c].push(p);
            }
        }
        let mut loops = Vec::new();
        // cycles rooted at their smallest vertex, each found twice (two directions)
        fn dfs(start: usize, v: usize, adj: &[Vec<usize>], path: &mut Vec<usize>, on: &mut [bool], out: &mut Vec<Vec<usize>>) {
            for &u in &adj[v] {
                if u == start && path.len() >= 3 {
                    out.push(path.clone());
                } else if u > start && !on[u] {
                    on[u] = true;
                    path.push(u);
                    dfs(start, u, adj, path, on, out);
                    path.pop();
                    on[u] = false;
                }
            }
        }
        for s in 0..n {
            let mut on = vec![false; n];
            on[s] = true;
            let mut path = vec![s];
            dfs(s, s, &adj, &mut path, &mut on, &mut loops);
        }
        loops.retain(|l| l[1] < l[l.len() - 1]);
        loops
    }

    /// Loop members that are not sinks of that loop.
    pub(crate) fn allowed_vertices(net: &BayesNet, lp: &[VarId]) -> Vec<VarId> {
        let k = lp.len();
        (0..k)
            .filter(|&i| {
                let v = lp[i];
                let prev = lp[(i + k - 1) % k];
                let next = lp[(i + 1) % k];
                !(net.parents(v).contains(&prev) && net.parents(v).contains(&next))
            })
            .map(|i| lp[i])
            .collect()
    }

    /// Literal loop-cutset definition: an allowed vertex on every loop.
    fn cutset_by_definition(net: &BayesNet, z: &[VarId]) -> bool {
        skeleton_loops(net)
            .iter()
            .all(|lp| allowed_vertices(net, lp).iter().any(|v| z.contains(v)))
    }

    #[test]
    fn diamond_by_definition() {
        let d = diamond();
        let loops = skeleton_loops(&d);
        assert_eq!(loops.len(), 1);
        assert!(cutset_by_definition(&d, &[0]));
        assert!(!cutset_by_definition(&d, &[3]));
    }

    #[test]
    fn split_test_agrees_with_definition_on_small_nets() {
        for seed in 0..60 {
            let net = crate::model::generate_random_network(&GeneratorConfig::new(7, 3, 2, 0.0, seed));
            for mask in 0u32..(1 << 7) {
                let z: Vec<VarId> = (0..7).filter(|&v| mask & (1 << v) != 0).collect();
                assert_eq!(
                    validate_loop_cutset(&net, &z),
                    cutset_by_definition(&net, &z),
                    "seed {seed} z {z:?}"
                );
            }
        }
    }

    #[test]
    fn allowed_vertex_superset_is_a_cutset() {
        for seed in 0..40 {
            let net = crate::model::generate_random_network(&GeneratorConfig::new(8, 3, 2, 0.0, seed));
            let mut z: Vec<VarId> = skeleton_loops(&net)
                .iter()
                .flat_map(|lp| allowed_vertices(&net, lp))
                .collect();
            z.sort_unstable();
            z.dedup();
            assert!(validate_loop_cutset(&net, &z));
        }
    }

    #[test]
    fn minimal_cutsets_are_tight() {
        for seed in 0..30 {
            let net = crate::model::generate_random_network(&GeneratorConfig::new(9, 3, 2, 0.0, seed));
            // smallest cutset by exhaustive search
            let mut minimal: Option<Vec<VarId>> = None;
            for mask in 0u32..(1 << 9) {
                let z: Vec<VarId> = (0..9).filter(|&v| mask & (1 << v) != 0).collect();
                if validate_loop_cutset(&net, &z) && minimal.as_ref().is_none_or(|m| z.len() < m.len()) {
                    minimal = Some(z);
                }
            }
            let minimal = minimal.unwrap();
            for i in 0..minimal.len() {
                let mut less = minimal.clone();
                less.remove(i);
                assert!(!validate_loop_cutset(&net, &less));
            }
            let greedy = find_loop_cutset(&net, &[]);
            assert!(greedy.len() >= minimal.len());
            assert!(validate_loop_cutset(&net, greedy.members()));
        }
    }

    #[test]
    fn greedy_cutset_deterministic() {
        let net = crate::model::generate_random_network(&GeneratorConfig::new(30, 3, 2, 0.0, 4));
        assert_eq!(find_loop_cutset(&net, &[]), find_loop_cutset(&net, &[]));
    }
}
