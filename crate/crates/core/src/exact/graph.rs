//! Factor graph shared by the poly-tree engine and loopy BP.
//!
//! Variable nodes are the unobserved variables of the (sub)network; there is
//! one factor node per kept CPT, restricted to the observed values. CPTs whose
//! every variable is observed collapse into a constant.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::ln;
use crate::model::{BayesNet, VarId};

pub(crate) struct LocalFactor {
    /// Edge ids, one per scope position.
    pub edges: Vec<usize>,
    pub cards: Vec<usize>,
    pub table: Vec<f64>,
}

pub(crate) struct FactorGraph {
    pub var_global: Vec<VarId>,
    pub var_card: Vec<usize>,
    pub var_edges: Vec<Vec<usize>>,
    pub factors: Vec<LocalFactor>,
    pub edge_var: Vec<usize>,
    pub edge_factor: Vec<usize>,
    /// Offset of each edge's message in the flat message buffers.
    pub edge_off: Vec<usize>,
    pub msg_len: usize,
    /// Log of the product of fully observed CPT entries; `-inf` when one is 0.
    pub log_const: f64,
    /// Local index of each global variable (`usize::MAX` when absent).
    pub local: Vec<usize>,
}

pub(crate) const ABSENT: usize = usize::MAX;

impl FactorGraph {
    pub fn build(net: &BayesNet, kept: Option<&[bool]>, observed: &[Option<usize>]) -> Self {
        let n = net.len();
        let keep = |v: VarId| kept.is_none_or(|m| m[v]);
        let mut local = vec![ABSENT; n];
        let mut var_global = Vec::new();
        let mut var_card = Vec::new();
        for v in 0..n {
            if keep(v) && observed[v].is_none() {
                local[v] = var_global.len();
                var_global.push(v);
                var_card.push(net.card(v));
            }
        }
        let mut g = FactorGraph {
            var_edges: vec![Vec::new(); var_global.len()],
            var_global,
            var_card,
            factors: Vec::new(),
            edge_var: Vec::new(),
            edge_factor: Vec::new(),
            edge_off: Vec::new(),
            msg_len: 0,
            log_const: 0.0,
            local,
        };
        let mut scope: Vec<VarId> = Vec::new();
        for v in 0..n {
            if !keep(v) {
                continue;
            }
            let cpt = net.cpt(v);
            scope.clear();
            scope.extend(cpt.parents.iter().copied().filter(|&p| observed[p].is_none()));
            if observed[v].is_none() {
                scope.push(v);
            }
            if scope.is_empty() {
                // every parent and the child are observed
                let mut r = 0;
                for &p in &cpt.parents {
                    r = r * net.card(p) + observed[p].unwrap_or(0);
                }
                let x = cpt.row(r)[observed[v].unwrap_or(0)];
                g.log_const += ln(x);
                continue;
            }
            let cards: Vec<usize> = scope.iter().map(|&u| net.card(u)).collect();
            let size: usize = cards.iter().product();
            let mut table = Vec::with_capacity(size);
            // walk scope assignments (last fastest) and read the matching CPT entry
            let mut cur = vec![0usize; scope.len()];
            for _ in 0..size {
                let mut r = 0;
                let mut k = 0;
                for &p in &cpt.parents {
                    let x = match observed[p] {
                        Some(x) => x,
                        None => {
                            let x = cur[k];
                            k += 1;
                            x
                        }
                    };
                    r = r * net.card(p) + x;
                }
                let x = observed[v].unwrap_or_else(|| cur[k]);
                table.push(cpt.row(r)[x]);
                for i in (0..cur.len()).rev() {
                    cur[i] += 1;
                    if cur[i] < cards[i] {
                        break;
                    }
                    cur[i] = 0;
                }
            }
            let f = g.factors.len();
            let mut edges = Vec::with_capacity(scope.len());
            for &u in scope.iter() {
                let e = g.edge_var.len();
                let lv = g.local[u];
                g.edge_var.push(lv);
                g.edge_factor.push(f);
                g.edge_off.push(g.msg_len);
                g.msg_len += g.var_card[lv];
                g.var_edges[lv].push(e);
                edges.push(e);
            }
            g.factors.push(LocalFactor { edges, cards, table });
        }
        g
    }

    pub fn num_nodes(&self) -> usize {
        self.var_global.len() + self.factors.len()
    }

    /// Whether the bipartite graph is a forest.
    pub fn is_forest(&self) -> bool {
        let nv = self.var_global.len();
        let mut uf = crate::graphops::UnionFind::new(self.num_nodes());
        for e in 0..self.edge_var.len() {
            if !uf.union(self.edge_var[e], nv + self.edge_factor[e]) {
                return false;
            }
        }
        true
    }

    #[inline]
    pub fn msg<'a>(&self, buf: &'a [f64], e: usize) -> &'a [f64] {
        let off = self.edge_off[e];
        &buf[off..off + self.var_card[self.edge_var[e]]]
    }

    /// Unnormalized factor-to-variable message along edge `e`, using the
    /// variable-to-factor messages in `vf` for the other scope positions.
    pub fn factor_to_var(&self, e: usize, vf: &[f64], out: &mut [f64]) {
        let f = &self.factors[self.edge_factor[e]];
        let pos = f.edges.iter().position(|&x| x == e).expect("edge in factor");
        out.iter_mut().for_each(|x| *x = 0.0);
        let k = f.cards.len();
        if k == 1 {
            out.copy_from_slice(&f.table);
            return;
        }
        let mut cur = [0usize; 16];
        let mut cur_vec;
        let cur: &mut [usize] = if k <= 16 {
            &mut cur[..k]
        } else {
            cur_vec = vec![0usize; k];
            &mut cur_vec
        };
        for &t in &f.table {
            if t != 0.0 {
                let mut p = t;
                for (i, &ei) in f.edges.iter().enumerate() {
                    if i != pos {
                        p *= vf[self.edge_off[ei] + cur[i]];
                        if p == 0.0 {
                            break;
                        }
                    }
                }
                out[cur[pos]] += p;
            }
            for i in (0..k).rev() {
                cur[i] += 1;
                if cur[i] < f.cards[i] {
                    break;
                }
                cur[i] = 0;
            }
        }
    }

    /// Unnormalized variable-to-factor message along `e`: product of the
    /// incoming factor messages on the variable's other edges.
    pub fn var_to_factor(&self, e: usize, fv: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 1.0);
        let v = self.edge_var[e];
        for &o in &self.var_edges[v] {
            if o != e {
                let m = self.msg(fv, o);
                for (x, &y) in out.iter_mut().zip(m) {
                    *x *= y;
                }
            }
        }
    }

    /// Product of every incoming factor message at local variable `v`.
    pub fn belief(&self, v: usize, fv: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 1.0);
        for &o in &self.var_edges[v] {
            let m = self.msg(fv, o);
            for (x, &y) in out.iter_mut().zip(m) {
                *x *= y;
            }
        }
    }
}
