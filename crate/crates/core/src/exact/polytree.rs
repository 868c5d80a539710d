//! Exact sum-product on singly-connected factor graphs.
//!
//! Each connected component is rooted at a variable; one upward sweep
//! collects normalized messages (their scales add up to `ln P(e)`), and a
//! downward sweep completes the beliefs when all marginals are requested.
//! Both sweeps touch every CPT entry a constant number of times, so a query
//! is linear in the size of the subnetwork.

use alloc::vec;
use alloc::vec::Vec;

use super::graph::{FactorGraph, ABSENT};
use super::{ExactError, Marginals, QueryResult};
use crate::graphops::Subnetwork;
use crate::math::{ln, normalize};
use crate::model::{BayesNet, Evidence, VarId};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Target {
    /// `P(e)` and every marginal.
    All,
    /// `P(e)` only.
    Evidence,
    /// The marginal of one variable; components not containing it are skipped.
    One(VarId),
}

struct Output {
    log_pe: f64,
    beliefs: Vec<(VarId, Vec<f64>)>,
}

const NONE: usize = usize::MAX;

fn run(net: &BayesNet, kept: Option<&[bool]>, observed: &[Option<usize>], target: Target) -> Result<Output, ExactError> {
    let g = FactorGraph::build(net, kept, observed);
    if !g.is_forest() {
        return Err(ExactError::NotSinglyConnected);
    }
    let zero = Output {
        log_pe: f64::NEG_INFINITY,
        beliefs: Vec::new(),
    };
    // fully observed CPTs sit outside every component, so they do not
    // affect a single-target conditional
    if g.log_const == f64::NEG_INFINITY && !matches!(target, Target::One(_)) {
        return Ok(zero);
    }
    let nv = g.var_global.len();
    let nodes = g.num_nodes();
    let mut vf = vec![0.0; g.msg_len];
    let mut fv = vec![0.0; g.msg_len];
    let mut parent_edge = vec![NONE; nodes];
    let mut seen = vec![false; nodes];
    let mut order: Vec<usize> = Vec::with_capacity(nodes);
    let mut roots: Vec<usize> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();

    let starts: Vec<usize> = match target {
        Target::One(v) => {
            let lv = g.local.get(v).copied().unwrap_or(ABSENT);
            if lv == ABSENT {
                return Ok(Output {
                    log_pe: g.log_const,
                    beliefs: Vec::new(),
                });
            }
            vec![lv]
        }
        _ => (0..nv).collect(),
    };
    for s in starts {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        roots.push(s);
        stack.push(s);
        while let Some(node) = stack.pop() {
            order.push(node);
            let edges: &[usize] = if node < nv {
                &g.var_edges[node]
            } else {
                &g.factors[node - nv].edges
            };
            for &e in edges {
                if e == parent_edge[node] {
                    continue;
                }
                let other = if node < nv { nv + g.edge_factor[e] } else { g.edge_var[e] };
                if !seen[other] {
                    seen[other] = true;
                    parent_edge[other] = e;
                    stack.push(other);
                }
            }
        }
    }

    // upward
    let mut log_pe = match target {
        Target::One(_) => 0.0,
        _ => g.log_const,
    };
    let mut tmp = Vec::new();
    for &node in order.iter().rev() {
        let e = parent_edge[node];
        if e == NONE {
            continue;
        }
        let off = g.edge_off[e];
        let len = g.var_card[g.edge_var[e]];
        let s = if node < nv {
            g.var_to_factor(e, &fv, &mut vf[off..off + len]);
            normalize(&mut vf[off..off + len])
        } else {
            tmp.clear();
            tmp.resize(len, 0.0);
            g.factor_to_var(e, &vf, &mut tmp);
            let s = normalize(&mut tmp);
            fv[off..off + len].copy_from_slice(&tmp);
            s
        };
        if s == 0.0 {
            return Ok(zero);
        }
        log_pe += ln(s);
    }
    let mut beliefs = Vec::new();
    for &r in &roots {
        let mut b = vec![0.0; g.var_card[r]];
        g.belief(r, &fv, &mut b);
        let s = normalize(&mut b);
        if s == 0.0 {
            return Ok(zero);
        }
        log_pe += ln(s);
        if let Target::One(_) = target {
            beliefs.push((g.var_global[r], b));
        }
    }
    if target != Target::All {
        return Ok(Output { log_pe, beliefs });
    }

    // downward
    for &node in &order {
        let e = parent_edge[node];
        if e == NONE {
            continue;
        }
        let off = g.edge_off[e];
        let len = g.var_card[g.edge_var[e]];
        tmp.clear();
        tmp.resize(len, 0.0);
        if node < nv {
            g.factor_to_var(e, &vf, &mut tmp);
            normalize(&mut tmp);
            fv[off..off + len].copy_from_slice(&tmp);
        } else {
            g.var_to_factor(e, &fv, &mut tmp);
            normalize(&mut tmp);
            vf[off..off + len].copy_from_slice(&tmp);
        }
    }
    for v in 0..nv {
        let mut b = vec![0.0; g.var_card[v]];
        g.belief(v, &fv, &mut b);
        normalize(&mut b);
        beliefs.push((g.var_global[v], b));
    }
    Ok(Output { log_pe, beliefs })
}

/// Exact `P(e)` and posterior marginals on a network (or subnetwork) that is
/// singly-connected once the observed variables are split. Evidence on
/// variables outside the subnetwork is ignored.
pub fn polytree_query(net: &BayesNet, within: Option<&Subnetwork>, evidence: &Evidence) -> Result<QueryResult, ExactError> {
    evidence.validate(net)?;
    let observed = evidence.to_dense(net.len());
    let (log_pe, marginals) = polytree_marginals(net, within.map(Subnetwork::mask), &observed)?;
    Ok(QueryResult::from_log(log_pe, marginals))
}

/// `ln P(observed)` and the posterior marginals of every unobserved kept
/// variable (`None` when the evidence has zero probability).
pub(crate) fn polytree_marginals(
    net: &BayesNet,
    kept: Option<&[bool]>,
    observed: &[Option<usize>],
) -> Result<(f64, Option<Marginals>), ExactError> {
    let out = run(net, kept, observed, Target::All)?;
    if out.log_pe == f64::NEG_INFINITY {
        return Ok((out.log_pe, None));
    }
    let mut m = Marginals::new(net.len());
    for (v, b) in out.beliefs {
        m.set(v, b);
    }
    Ok((out.log_pe, Some(m)))
}

/// `ln P(observed)` over the kept variables.
pub(crate) fn polytree_log_evidence(net: &BayesNet, kept: Option<&[bool]>, observed: &[Option<usize>]) -> Result<f64, ExactError> {
    Ok(run(net, kept, observed, Target::Evidence)?.log_pe)
}

/// Posterior distribution of the unobserved variable `target` given the
/// observed ones, computed on `target`'s component only. `None` when the
/// component's evidence has probability zero.
pub(crate) fn polytree_conditional(
    net: &BayesNet,
    kept: Option<&[bool]>,
    observed: &[Option<usize>],
    target: VarId,
) -> Result<Option<Vec<f64>>, ExactError> {
    let out = run(net, kept, observed, Target::One(target))?;
    if out.log_pe == f64::NEG_INFINITY {
        return Ok(None);
    }
    Ok(out.beliefs.into_iter().next().map(|(_, b)| b))
}
