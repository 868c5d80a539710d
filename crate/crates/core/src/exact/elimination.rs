use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use super::{ExactError, Factor, Marginals, QueryResult};
use crate::math::ln;
use crate::model::{BayesNet, Evidence, VarId};

/// Min-fill elimination order over the interaction graph of `factors`,
/// restricted to `vars`. Ties go to the lowest id.
pub fn min_fill_order(factors: &[Factor], vars: &[VarId], n: usize) -> Vec<VarId> {
    let mut adj: Vec<BTreeSet<VarId>> = vec![BTreeSet::new(); n];
    for f in factors {
        for &a in f.scope() {
            for &b in f.scope() {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
    }
    let mut left: BTreeSet<VarId> = vars.iter().copied().collect();
    let mut order = Vec::with_capacity(left.len());
    while !left.is_empty() {
        let mut best: Option<(usize, VarId)> = None;
        for &v in &left {
            let nb: Vec<VarId> = adj[v].iter().copied().collect();
            let mut fill = 0;
            for i in 0..nb.len() {
                for j in i + 1..nb.len() {
                    if !adj[nb[i]].contains(&nb[j]) {
                        fill += 1;
                    }
                }
            }
            if best.is_none_or(|(f, _)| fill < f) {
                best = Some((fill, v));
            }
        }
        let (_, v) = best.expect("nonempty");
        let nb: Vec<VarId> = adj[v].iter().copied().collect();
        for i in 0..nb.len() {
            adj[nb[i]].remove(&v);
            for j in 0..nb.len() {
                if i != j {
                    adj[nb[i]].insert(nb[j]);
                }
            }
        }
        adj[v].clear();
        left.remove(&v);
        order.push(v);
    }
    order
}

/// Eliminates `order` from `factors`, bucket by bucket. Returns the product
/// of what remains together with the accumulated log scale.
fn eliminate(mut factors: Vec<Factor>, order: &[VarId]) -> (Factor, f64) {
    let mut log_scale = 0.0;
    for &v in order {
        let (bucket, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.scope().contains(&v));
        factors = rest;
        let Some(first) = bucket.first() else { continue };
        let mut prod = bucket[1..].iter().fold(first.clone(), |acc, f| acc.product(f));
        prod = prod.sum_out(v);
        let s = prod.rescale();
        if s == 0.0 {
            return (Factor::constant(0.0), f64::NEG_INFINITY);
        }
        log_scale += ln(s);
        factors.push(prod);
    }
    let mut out = Factor::constant(1.0);
    for f in &factors {
        out = out.product(f);
    }
    (out, log_scale)
}

/// Exact `P(e)` and posterior marginals by bucket elimination. The marginal
/// of each unobserved variable comes from a separate elimination run that
/// keeps that variable.
pub fn bucket_elimination_query(net: &BayesNet, evidence: &Evidence) -> Result<QueryResult, ExactError> {
    evidence.validate(net)?;
    let n = net.len();
    let observed = evidence.to_dense(n);
    let factors: Vec<Factor> = (0..n).map(|v| Factor::from_cpt(net, v, &observed)).collect();
    let free: Vec<VarId> = (0..n).filter(|&v| observed[v].is_none()).collect();

    let order = min_fill_order(&factors, &free, n);
    let (z, log_scale) = eliminate(factors.clone(), &order);
    let pe = z.values()[0];
    if !(pe > 0.0) {
        return Ok(QueryResult::from_log(f64::NEG_INFINITY, None));
    }
    let log_pe = ln(pe) + log_scale;

    let mut marginals = Marginals::new(n);
    for &q in &free {
        let others: Vec<VarId> = free.iter().copied().filter(|&v| v != q).collect();
        let order = min_fill_order(&factors, &others, n);
        let (f, _) = eliminate(factors.clone(), &order);
        debug_assert_eq!(f.scope(), &[q]);
        let mut d = f.values().to_vec();
        crate::math::normalize(&mut d);
        marginals.set(q, d);
    }
    Ok(QueryResult::from_log(log_pe, Some(marginals)))
}
