use alloc::vec;
use alloc::vec::Vec;

use super::graph::FactorGraph;
use super::{ExactError, Marginals};
use crate::math::{ln, normalize};
use crate::model::{BayesNet, Evidence};

/// Outcome of loopy belief propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct IbpResult {
    /// Bethe estimate of `ln P(e)`. Exact on poly-trees, an approximation
    /// otherwise.
    pub approx_log_evidence_probability: f64,
    /// Beliefs of unobserved variables; `None` when propagation collapsed to
    /// all-zero messages (contradictory evidence).
    pub marginals: Option<Marginals>,
    pub converged: bool,
    pub iterations: usize,
}

/// Iterative belief propagation with synchronous (flood) updates and no
/// damping. Stops once the largest change of any normalized message falls
/// below `tol`, or after `max_iters` sweeps.
pub fn iterative_bp(net: &BayesNet, evidence: &Evidence, max_iters: usize, tol: f64) -> Result<IbpResult, ExactError> {
    evidence.validate(net)?;
    let observed = evidence.to_dense(net.len());
    let g = FactorGraph::build(net, None, &observed);
    let collapsed = |iterations| IbpResult {
        approx_log_evidence_probability: f64::NEG_INFINITY,
        marginals: None,
        converged: true,
        iterations,
    };
    if g.log_const == f64::NEG_INFINITY {
        return Ok(collapsed(0));
    }
    let ne = g.edge_var.len();
    let mut vf = vec![0.0; g.msg_len];
    for e in 0..ne {
        let c = g.var_card[g.edge_var[e]];
        let off = g.edge_off[e];
        vf[off..off + c].iter_mut().for_each(|x| *x = 1.0 / c as f64);
    }
    let mut fv = vf.clone();
    let mut next_fv = vf.clone();
    let mut next_vf = vf.clone();

    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        for e in 0..ne {
            let off = g.edge_off[e];
            let c = g.var_card[g.edge_var[e]];
            g.factor_to_var(e, &vf, &mut next_fv[off..off + c]);
            if normalize(&mut next_fv[off..off + c]) == 0.0 {
                return Ok(collapsed(iterations));
            }
        }
        for e in 0..ne {
            let off = g.edge_off[e];
            let c = g.var_card[g.edge_var[e]];
            g.var_to_factor(e, &next_fv, &mut next_vf[off..off + c]);
            if normalize(&mut next_vf[off..off + c]) == 0.0 {
                return Ok(collapsed(iterations));
            }
        }
        let delta = fv
            .iter()
            .zip(&next_fv)
            .chain(vf.iter().zip(&next_vf))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        core::mem::swap(&mut fv, &mut next_fv);
        core::mem::swap(&mut vf, &mut next_vf);
        if delta < tol {
            converged = true;
            break;
        }
    }

    let mut marginals = Marginals::new(net.len());
    let mut log_z = g.log_const;
    for v in 0..g.var_global.len() {
        let mut b = vec![0.0; g.var_card[v]];
        g.belief(v, &fv, &mut b);
        let s = normalize(&mut b);
        if s == 0.0 {
            return Ok(collapsed(iterations));
        }
        log_z += ln(s);
        marginals.set(g.var_global[v], b);
    }
    // Bethe: Σ_f ln Z_f + Σ_v ln Z_v - Σ_edges ln Z_e
    let mut ones = Vec::new();
    for f in &g.factors {
        // Z_f = Σ_x f(x) Π_v m_{v→f}(x_v): message to the first scope
        // variable, then weighted by that variable's own message
        let e0 = f.edges[0];
        let c0 = g.var_card[g.edge_var[e0]];
        ones.clear();
        ones.resize(c0, 0.0);
        g.factor_to_var(e0, &vf, &mut ones);
        let zf: f64 = ones.iter().zip(g.msg(&vf, e0)).map(|(a, b)| a * b).sum();
        log_z += ln(zf);
    }
    for e in 0..ne {
        let ze: f64 = g.msg(&vf, e).iter().zip(g.msg(&fv, e)).map(|(a, b)| a * b).sum();
        log_z -= ln(ze);
    }
    Ok(IbpResult {
        approx_log_evidence_probability: log_z,
        marginals: Some(marginals),
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{enumerate_joint_query, polytree_query};
    use crate::graphops::tests::diamond;
    use crate::model::{generate_random_network, generate_random_polytree, GeneratorConfig};

    #[test]
    fn exact_on_polytrees() {
        for seed in 0..40 {
            let net = generate_random_polytree(&GeneratorConfig::new(12, 3, 3, 0.0, seed));
            let mut ev = Evidence::new();
            for &leaf in net.leaves().iter().take(2) {
                ev.insert(leaf, 0);
            }
            let ibp = iterative_bp(&net, &ev, 200, 1e-12).unwrap();
            let pt = polytree_query(&net, None, &ev).unwrap();
            assert!(ibp.converged);
            let d = ibp.marginals.unwrap().max_abs_diff(&pt.marginals.unwrap()).unwrap();
            assert!(d < 1e-6, "seed {seed}: {d}");
            assert!((ibp.approx_log_evidence_probability - pt.log_evidence_probability).abs() < 1e-6);
        }
    }

    #[test]
    fn loopy_marginals_normalized() {
        let net = generate_random_network(&GeneratorConfig::new(10, 3, 3, 0.0, 2));
        let r = iterative_bp(&net, &Evidence::new(), 200, 1e-9).unwrap();
        for (_, d) in r.marginals.unwrap().iter() {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn loopy_diamond_returns_a_result() {
        let net = diamond();
        let r = iterative_bp(&net, &Evidence::from_pairs([(3, 1)]), 200, 1e-9).unwrap();
        assert!(r.marginals.is_some());
        let ex = enumerate_joint_query(&net, &Evidence::from_pairs([(3, 1)])).unwrap();
        // uniform CPTs: BP is exact here
        assert!(r.marginals.unwrap().max_abs_diff(&ex.marginals.unwrap()).unwrap() < 1e-9);
    }
}
