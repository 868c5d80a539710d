//! Accuracy metrics, proposal comparisons by enumeration, and convergence
//! traces.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::cutset::{build_cutset_order, CutsetOrder, ZKind};
use crate::exact::{Marginals, DEFAULT_STATE_CAP};
use crate::graphops::Cutset;
use crate::math::ln;
use crate::model::{BayesNet, Evidence, Odometer};
use crate::sampling::{Checkpoint, SamplingError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("marginal tables cover different variables or domains")]
    MismatchedTables,
    #[error("estimate unavailable: all samples were rejected")]
    Unresolved,
    #[error("distributions have different lengths")]
    LengthMismatch,
    #[error("support violation: P(x) > 0 where Q(x) = 0 at index {0}")]
    Support(usize),
    #[error("joint state space of {size} configurations exceeds the cap of {cap}")]
    StateSpaceTooLarge { size: u128, cap: u128 },
    #[error("evidence has probability zero")]
    ZeroEvidence,
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

/// Mean squared error over every cell of every variable the tables cover:
/// `Σ_i Σ_x (P(x_i|e) − P̂(x_i|e))² / Σ_i |D(X_i)|`.
pub fn mse(exact: &Marginals, estimate: &Marginals) -> Result<f64, EvalError> {
    if exact.len() != estimate.len() {
        return Err(EvalError::MismatchedTables);
    }
    let mut sum = 0.0;
    let mut cells = 0usize;
    for v in 0..exact.len() {
        match (exact.get(v), estimate.get(v)) {
            (None, None) => {}
            (Some(a), Some(b)) if a.len() == b.len() => {
                sum += a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
                cells += a.len();
            }
            _ => return Err(EvalError::MismatchedTables),
        }
    }
    Ok(if cells == 0 { 0.0 } else { sum / cells as f64 })
}

/// [`mse`] of an estimate that may be unresolved.
pub fn mse_or_unresolved(exact: &Marginals, estimate: Option<&Marginals>) -> Result<f64, EvalError> {
    mse(exact, estimate.ok_or(EvalError::Unresolved)?)
}

/// `KL(P, Q) = Σ_x P(x) ln(P(x)/Q(x))` in nats, with `0·ln(0/q) = 0`.
pub fn kl(p: &[f64], q: &[f64]) -> Result<f64, EvalError> {
    if p.len() != q.len() {
        return Err(EvalError::LengthMismatch);
    }
    let mut d = 0.0;
    for (i, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(EvalError::Support(i));
            }
            d += a * ln(a / b);
        }
    }
    Ok(d)
}

/// Sampling distributions of full likelihood weighting and of likelihood
/// weighting on a cutset, compared against their targets by enumeration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposalComparison {
    pub evidence_probability: f64,
    /// `KL(P(C|e), Q(C))` for the cutset proposal, in nats.
    pub kl_cutset: f64,
    /// `KL(P(X|e), Q(X))` for the full-space proposal, in nats.
    pub kl_full: f64,
    /// `Var_Q[w]` of cutset weights.
    pub var_cutset: f64,
    /// `Var_Q[w]` of full likelihood-weighting weights.
    pub var_full: f64,
}

impl ProposalComparison {
    /// Cutset proposal at least as close to its target as the full one.
    pub fn kl_holds(&self) -> bool {
        self.kl_cutset <= self.kl_full + 1e-12
    }

    /// Cutset weights vary no more than full weights (up to rounding of
    /// the second moments).
    pub fn variance_holds(&self) -> bool {
        let pe2 = self.evidence_probability * self.evidence_probability;
        self.var_cutset <= self.var_full + 1e-12 * pe2
    }
}

/// Exhaustive comparison of the LW and LWLC proposals on one instance.
/// Every variable, observed or not, is enumerated, so the whole joint must
/// stay under `cap` configurations.
pub fn compare_proposals(net: &BayesNet, evidence: &Evidence, cutset: &Cutset, cap: u128) -> Result<ProposalComparison, EvalError> {
    let order = build_cutset_order(net, evidence, cutset)?;
    let size = (0..net.len()).fold(1u128, |acc, v| acc.saturating_mul(net.card(v) as u128));
    if size > cap {
        return Err(EvalError::StateSpaceTooLarge { size, cap });
    }
    let m = order.len();
    // prefix[i]: P(z_1..z_{i+1}) for prefixes consistent with the evidence
    let mut prefix: Vec<BTreeMap<Vec<usize>, f64>> = vec![BTreeMap::new(); m];
    // (joint, Q_LW) per full assignment consistent with the evidence
    let mut full: Vec<(f64, f64)> = Vec::new();
    let mut odo = Odometer::new(net.cards());
    while let Some(x) = odo.current() {
        let p = net.joint_probability(x);
        let mut key = Vec::with_capacity(m);
        for (i, entry) in order.entries().iter().enumerate() {
            if let ZKind::Evidence(e) = entry.kind {
                if x[entry.var] != e {
                    break;
                }
            }
            key.push(x[entry.var]);
            *prefix[i].entry(key.clone()).or_insert(0.0) += p;
        }
        if evidence.iter().all(|(v, e)| x[v] == e) {
            let q: f64 = (0..net.len()).filter(|&v| !evidence.contains(v)).map(|v| net.prob(v, x[v], x)).product();
            full.push((p, q));
        }
        odo.advance();
    }
    let pe: f64 = full.iter().map(|&(p, _)| p).sum();
    if !(pe > 0.0) {
        return Err(EvalError::ZeroEvidence);
    }

    let mut kl_full = 0.0;
    let mut m2_full = 0.0;
    for &(p, q) in &full {
        if p > 0.0 {
            kl_full += (p / pe) * ln((p / pe) / q);
            m2_full += p * p / q;
        }
    }

    let mut kl_cutset = 0.0;
    let mut m2_cutset = 0.0;
    if m == 0 {
        // no evidence and no cutset: the only weight is 1
        m2_cutset = 1.0;
    }
    for (z, &p) in prefix.last().into_iter().flatten() {
        if p == 0.0 {
            continue;
        }
        let q = cutset_proposal(&order, &prefix, z);
        kl_cutset += (p / pe) * ln((p / pe) / q);
        m2_cutset += p * p / q;
    }
    Ok(ProposalComparison {
        evidence_probability: pe,
        kl_cutset,
        kl_full,
        var_cutset: (m2_cutset - pe * pe).max(0.0),
        var_full: (m2_full - pe * pe).max(0.0),
    })
}

/// `Q(c) = Π_i P(c_i | z_<i)` from prefix sums.
fn cutset_proposal(order: &CutsetOrder, prefix: &[BTreeMap<Vec<usize>, f64>], z: &[usize]) -> f64 {
    let mut q = 1.0;
    for pos in order.cutset_positions() {
        let num = prefix[pos][&z[..=pos]];
        let den = if pos == 0 { 1.0 } else { prefix[pos - 1][&z[..pos]] };
        q *= num / den;
    }
    q
}

/// [`compare_proposals`] with the default enumeration cap.
pub fn compare_proposals_default(net: &BayesNet, evidence: &Evidence, cutset: &Cutset) -> Result<ProposalComparison, EvalError> {
    compare_proposals(net, evidence, cutset, DEFAULT_STATE_CAP)
}

/// Unbiased sample variance; `None` for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    Some(xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0))
}

/// Sample variances of raw weights from an LW and an LWLC run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightVarianceReport {
    pub var_lw: f64,
    pub var_lwlc: f64,
}

pub fn weight_variance_report(lw_weights: &[f64], lwlc_weights: &[f64]) -> Option<WeightVarianceReport> {
    Some(WeightVarianceReport {
        var_lw: sample_variance(lw_weights)?,
        var_lwlc: sample_variance(lwlc_weights)?,
    })
}

/// One row of a convergence trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub scheme: String,
    pub seed: u64,
    pub t_ms: f64,
    pub samples: u64,
    pub rejected: u64,
    /// `None` when unresolved or when no exact reference is available.
    pub mse: Option<f64>,
    pub unresolved: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTrace {
    pub rows: Vec<TraceRow>,
}

impl ConvergenceTrace {
    /// Rows for the checkpoints of one run, scored against `exact` when
    /// given.
    pub fn from_checkpoints(scheme: &str, seed: u64, checkpoints: &[Checkpoint], exact: Option<&Marginals>) -> Result<Self, EvalError> {
        let mut rows = Vec::with_capacity(checkpoints.len());
        for c in checkpoints {
            let mse = match (exact, &c.marginals) {
                (Some(ex), Some(est)) => Some(mse(ex, est)?),
                _ => None,
            };
            rows.push(TraceRow {
                scheme: scheme.into(),
                seed,
                t_ms: c.elapsed_ms,
                samples: c.samples,
                rejected: c.rejected,
                mse,
                unresolved: c.marginals.is_none(),
            });
        }
        Ok(ConvergenceTrace { rows })
    }

    pub fn extend(&mut self, other: ConvergenceTrace) {
        self.rows.extend(other.rows);
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphops::find_loop_cutset;
    use crate::model::{generate_random_network, generate_random_polytree, Cpt, GeneratorConfig, Variable};

    fn one(d: &[f64]) -> Marginals {
        Marginals::from_vec(vec![Some(d.to_vec())])
    }

    #[test]
    fn mse_cases() {
        assert_eq!(mse(&one(&[0.5, 0.5]), &one(&[0.5, 0.5])).unwrap(), 0.0);
        assert!((mse(&one(&[0.5, 0.5]), &one(&[0.6, 0.4])).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(mse_or_unresolved(&one(&[0.5, 0.5]), None).unwrap_err(), EvalError::Unresolved);
        let two = Marginals::from_vec(vec![Some(vec![0.5, 0.5]), None]);
        assert_eq!(mse(&one(&[0.5, 0.5]), &two).unwrap_err(), EvalError::MismatchedTables);
    }

    #[test]
    fn kl_cases() {
        assert_eq!(kl(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!((kl(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - core::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(kl(&[0.5, 0.5], &[1.0, 0.0]).unwrap_err(), EvalError::Support(1));
    }

    #[test]
    fn polytree_with_empty_cutset() {
        let net = generate_random_polytree(&GeneratorConfig::new(8, 2, 2, 0.0, 3));
        let leaf = net.leaves()[0];
        let ev = Evidence::from_pairs([(leaf, 1)]);
        let r = compare_proposals_default(&net, &ev, &Cutset::default()).unwrap();
        assert!(r.kl_cutset.abs() < 1e-12);
        assert!(r.var_cutset < 1e-15);
        assert!(r.kl_holds() && r.variance_holds());
    }

    #[test]
    fn diamond_comparison() {
        let net = BayesNet::new(
            (0..4).map(|i| Variable::with_card(["A", "B", "C", "D"][i], 2)).collect(),
            vec![
                Cpt::new(0, vec![], vec![vec![0.6, 0.4]]),
                Cpt::new(1, vec![0], vec![vec![0.2, 0.8], vec![0.75, 0.25]]),
                Cpt::new(2, vec![0], vec![vec![0.9, 0.1], vec![0.3, 0.7]]),
                Cpt::new(3, vec![1, 2], vec![vec![0.99, 0.01], vec![0.4, 0.6], vec![0.5, 0.5], vec![0.05, 0.95]]),
            ],
        )
        .unwrap();
        let r = compare_proposals_default(&net, &Evidence::from_pairs([(3, 1)]), &Cutset::new(vec![0])).unwrap();
        assert!(r.kl_cutset > 0.0 && r.kl_full > r.kl_cutset);
        assert!(r.var_cutset < r.var_full);
    }

    #[test]
    fn zero_evidence_is_an_error() {
        let net = BayesNet::new(
            vec![Variable::with_card("A", 2), Variable::with_card("B", 2)],
            vec![
                Cpt::new(0, vec![], vec![vec![1.0, 0.0]]),
                Cpt::new(1, vec![0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            ],
        )
        .unwrap();
        let e = compare_proposals_default(&net, &Evidence::from_pairs([(1, 1)]), &Cutset::default()).unwrap_err();
        assert_eq!(e, EvalError::ZeroEvidence);
    }

    #[test]
    fn random_instances_satisfy_both_inequalities() {
        for seed in 0..40 {
            let net = generate_random_network(&GeneratorConfig::new(9, 3, 2, 0.0, seed));
            let leaf = net.leaves()[0];
            let ev = Evidence::from_pairs([(leaf, (seed % 2) as usize)]);
            let c = find_loop_cutset(&net, &[leaf]);
            let r = compare_proposals_default(&net, &ev, &c).unwrap();
            assert!(r.kl_holds(), "seed {seed}: {r:?}");
            assert!(r.variance_holds(), "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn variances() {
        assert_eq!(sample_variance(&[2.0, 2.0, 2.0]), Some(0.0));
        assert_eq!(sample_variance(&[1.0]), None);
        assert!((sample_variance(&[1.0, 2.0, 3.0, 4.0]).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        let r = weight_variance_report(&[1.0, 3.0], &[1.0, 3.0]).unwrap();
        assert_eq!(r.var_lw, r.var_lwlc);
    }
}
