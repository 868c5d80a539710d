use alloc::vec;
use alloc::vec::Vec;

use super::{CutsetOrder, Segment, ZKind};
use crate::cache::{BufferOptions, CacheStats, CachedDist, NodeId, SampleTree, ROOT};
use crate::exact::{polytree_conditional, polytree_marginals, Marginals};
use crate::math::ln;
use crate::model::BayesNet;
use crate::rng::{draw_index, StreamRng};
use crate::sampling::{drive, Budget, CheckpointEvery, Clock, EstimatorState, RunOutput, SamplingError, Scheme, WeightedSample};

/// Likelihood weighting over a loop-cutset, optionally buffered by a
/// [`SampleTree`].
#[derive(Debug, Clone)]
pub struct LwlcSampler<'a> {
    net: &'a BayesNet,
    order: &'a CutsetOrder,
    tree: Option<SampleTree>,
    learn_dead_ends: bool,
    observed: Vec<Option<usize>>,
    path: Vec<usize>,
    step_probs: Vec<f64>,
    factors: Vec<f64>,
    log_weights: Option<Vec<(f64, f64)>>,
}

struct Walk {
    log_w: f64,
    zero_at: Option<usize>,
    leaf: Option<NodeId>,
}

impl Walk {
    fn rejected(at: usize) -> Walk {
        Walk {
            log_w: f64::NEG_INFINITY,
            zero_at: Some(at),
            leaf: None,
        }
    }
}

impl<'a> LwlcSampler<'a> {
    pub fn new(net: &'a BayesNet, order: &'a CutsetOrder) -> Self {
        LwlcSampler {
            net,
            order,
            tree: None,
            learn_dead_ends: false,
            observed: vec![None; net.len()],
            path: Vec::new(),
            step_probs: Vec::new(),
            factors: Vec::new(),
            log_weights: None,
        }
    }

    pub fn buffered(net: &'a BayesNet, order: &'a CutsetOrder, options: BufferOptions) -> Self {
        LwlcSampler {
            tree: Some(SampleTree::new(order.cutset().len(), options.cache_cap)),
            learn_dead_ends: options.learn_dead_ends,
            ..Self::new(net, order)
        }
    }

    pub fn tree(&self) -> Option<&SampleTree> {
        self.tree.as_ref()
    }

    pub fn cache_stats(&self) -> Option<CacheStats> {
        self.tree.as_ref().map(SampleTree::stats)
    }

    /// Keeps `(ln w, ln Q)` of every sample drawn through [`Scheme::step`].
    pub fn record_weights(&mut self) {
        self.log_weights = Some(Vec::new());
    }

    pub fn take_weights(&mut self) -> Vec<(f64, f64)> {
        self.log_weights.as_mut().map(core::mem::take).unwrap_or_default()
    }

    pub fn sample(&mut self, rng: &mut StreamRng) -> Result<WeightedSample, SamplingError> {
        let w = self.walk(rng)?;
        Ok(WeightedSample {
            assignment: self.observed.clone(),
            log_weight: w.log_w,
            step_probs: self.step_probs.clone(),
            zero_at: w.zero_at,
        })
    }

    fn walk(&mut self, rng: &mut StreamRng) -> Result<Walk, SamplingError> {
        let LwlcSampler {
            net,
            order,
            tree,
            learn_dead_ends,
            observed,
            path,
            step_probs,
            factors,
            ..
        } = self;
        observed.iter_mut().for_each(|x| *x = None);
        path.clear();
        step_probs.clear();
        if tree.as_ref().is_some_and(SampleTree::is_unsatisfiable) {
            return Ok(Walk::rejected(0));
        }
        let mut node = tree.as_ref().map(|_| ROOT);
        let mut log_w = 0.0;
        for seg in order.segments() {
            if let (Some(t), Some(id)) = (tree.as_mut(), node) {
                t.visit(id);
            }
            factors.clear();
            let hit = match node.and_then(|id| tree.as_ref()?.node(id).evidence_factors.as_ref()) {
                Some(f) => {
                    factors.extend_from_slice(f);
                    true
                }
                None => {
                    evidence_factors(net, order, seg, observed, factors)?;
                    false
                }
            };
            if let Some(t) = tree.as_mut() {
                t.record(hit);
                if let (Some(id), false) = (node, hit) {
                    t.node_mut(id).evidence_factors = Some(factors.clone());
                }
            }
            for (j, &f) in seg.evidence.clone().zip(factors.iter()) {
                let entry = order.entries()[j];
                if let ZKind::Evidence(e) = entry.kind {
                    observed[entry.var] = Some(e);
                }
                if f == 0.0 {
                    if let (Some(t), true) = (tree.as_mut(), *learn_dead_ends) {
                        t.mark_dead_end(path);
                    }
                    return Ok(Walk::rejected(j));
                }
                log_w += ln(f);
            }

            let Some(pos) = seg.cutset else { break };
            let var = order.entries()[pos].var;
            let cached = node.and_then(|id| tree.as_ref()?.node(id).dist.clone());
            let hit = cached.is_some();
            let dist = match cached {
                Some(d) => d,
                None => match polytree_conditional(net, Some(order.prefix(pos).mask()), observed, var)? {
                    Some(d) => CachedDist::new(d),
                    None => return Ok(Walk::rejected(pos)),
                },
            };
            let Some(x) = draw_index(rng, dist.current()) else {
                return Ok(Walk::rejected(pos));
            };
            step_probs.push(dist.current()[x]);
            if dist.has_dead_entries() {
                log_w += ln(dist.original()[x]) - ln(dist.current()[x]);
            }
            observed[var] = Some(x);
            path.push(x);
            if let Some(t) = tree.as_mut() {
                t.record(hit);
                if let (Some(id), false) = (node, hit) {
                    t.node_mut(id).dist = Some(dist);
                }
                node = node.and_then(|id| t.child_or_insert(id, x));
            }
        }
        Ok(Walk {
            log_w,
            zero_at: None,
            leaf: node,
        })
    }
}

/// Evidence conditionals `P(e_j | z_<j)` for the evidence positions of
/// `seg`, stopping after the first zero. Leaves the evidence values in
/// `observed`.
fn evidence_factors(
    net: &BayesNet,
    order: &CutsetOrder,
    seg: &Segment,
    observed: &mut [Option<usize>],
    out: &mut Vec<f64>,
) -> Result<(), SamplingError> {
    for j in seg.evidence.clone() {
        let entry = order.entries()[j];
        let ZKind::Evidence(e) = entry.kind else { unreachable!("segments hold evidence only") };
        let f = polytree_conditional(net, Some(order.prefix(j).mask()), observed, entry.var)?.map_or(0.0, |d| d[e]);
        observed[entry.var] = Some(e);
        out.push(f);
        if f == 0.0 {
            break;
        }
    }
    Ok(())
}

/// `P(x_i | c, e)` for every variable outside `C ∪ E`.
pub(crate) fn mixing_marginals(net: &BayesNet, observed: &[Option<usize>]) -> Result<Marginals, SamplingError> {
    let (_, m) = polytree_marginals(net, None, observed)?;
    Ok(m.expect("a positive-weight cutset tuple has positive probability"))
}

impl Scheme for LwlcSampler<'_> {
    fn step(&mut self, rng: &mut StreamRng, state: &mut EstimatorState) -> Result<(), SamplingError> {
        let w = self.walk(rng)?;
        if let Some(log) = &mut self.log_weights {
            log.push((w.log_w, self.step_probs.iter().map(|&p| ln(p)).sum()));
        }
        let Some(f) = state.accept(w.log_w) else {
            return Ok(());
        };
        for pos in self.order.cutset_positions() {
            let v = self.order.entries()[pos].var;
            state.add_indicator(v, self.observed[v].expect("accepted samples instantiate the cutset"), f);
        }
        let fresh;
        let m = match (self.tree.as_mut(), w.leaf) {
            (Some(t), Some(id)) => {
                let hit = t.node(id).mixing.is_some();
                t.record(hit);
                if !hit {
                    t.node_mut(id).mixing = Some(mixing_marginals(self.net, &self.observed)?);
                }
                t.node(id).mixing.as_ref().expect("stored above")
            }
            (t, _) => {
                if let Some(t) = t {
                    t.record(false);
                }
                fresh = mixing_marginals(self.net, &self.observed)?;
                &fresh
            }
        };
        for (v, d) in m.iter() {
            state.add_soft(v, d, f);
        }
        Ok(())
    }

    fn unsatisfiable(&self) -> bool {
        self.tree.as_ref().is_some_and(SampleTree::is_unsatisfiable)
    }
}

/// One unbuffered LWLC sample.
pub fn lwlc_sample(net: &BayesNet, order: &CutsetOrder, rng: &mut StreamRng) -> Result<WeightedSample, SamplingError> {
    LwlcSampler::new(net, order).sample(rng)
}

/// Repeated LWLC with the mixing estimator for non-cutset variables.
pub fn lwlc_run(
    net: &BayesNet,
    order: &CutsetOrder,
    budget: Budget,
    every: CheckpointEvery,
    clock: &dyn Clock,
    rng: &mut StreamRng,
) -> Result<RunOutput, SamplingError> {
    let mut s = LwlcSampler::new(net, order);
    drive(&mut s, EstimatorState::new(net, order.evidence()), budget, every, clock, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutset::build_cutset_order;
    use crate::exact::enumerate_joint_query;
    use crate::graphops::tests::diamond;
    use crate::graphops::{find_loop_cutset, Cutset};
    use crate::math::exp;
    use crate::model::{generate_random_network, Cpt, Evidence, GeneratorConfig, Variable};
    use crate::rng::stream;
    use crate::sampling::NoClock;

    fn skewed_diamond() -> BayesNet {
        BayesNet::new(
            (0..4).map(|i| Variable::with_card(["A", "B", "C", "D"][i], 2)).collect(),
            vec![
                Cpt::new(0, vec![], vec![vec![0.6, 0.4]]),
                Cpt::new(1, vec![0], vec![vec![0.2, 0.8], vec![0.75, 0.25]]),
                Cpt::new(2, vec![0], vec![vec![0.9, 0.1], vec![0.3, 0.7]]),
                Cpt::new(3, vec![1, 2], vec![vec![0.99, 0.01], vec![0.4, 0.6], vec![0.5, 0.5], vec![0.05, 0.95]]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn diamond_weight_is_evidence_conditional() {
        let net = skewed_diamond();
        let ev = Evidence::from_pairs([(3, 1)]);
        let ord = build_cutset_order(&net, &ev, &Cutset::new(vec![0])).unwrap();
        let mut rng = stream(0, 0);
        for _ in 0..20 {
            let s = lwlc_sample(&net, &ord, &mut rng).unwrap();
            let a = s.assignment[0].unwrap();
            let joint = enumerate_joint_query(&net, &Evidence::from_pairs([(0, a), (3, 1)])).unwrap().evidence_probability;
            let pa = [0.6, 0.4][a];
            assert!((s.weight() - joint / pa).abs() < 1e-12);
            assert!((s.proposal_probability() - pa).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_cutset_weight_is_evidence_probability() {
        let net = generate_random_network(&GeneratorConfig::new(9, 1, 3, 0.0, 4));
        let ev = Evidence::from_pairs([(net.leaves()[0], 0), (net.leaves()[1], 1)]);
        let c = find_loop_cutset(&net, &ev.vars().collect::<Vec<_>>());
        assert!(c.is_empty(), "single-parent networks are poly-trees");
        let ord = build_cutset_order(&net, &ev, &c).unwrap();
        let s = lwlc_sample(&net, &ord, &mut stream(0, 0)).unwrap();
        let pe = enumerate_joint_query(&net, &ev).unwrap().evidence_probability;
        assert!((s.weight() - pe).abs() < 1e-9);
    }

    #[test]
    fn diamond_marginals() {
        let net = skewed_diamond();
        let ev = Evidence::from_pairs([(3, 1)]);
        let ord = build_cutset_order(&net, &ev, &Cutset::new(vec![0])).unwrap();
        let out = lwlc_run(&net, &ord, Budget::Samples(100_000), CheckpointEvery::Never, &NoClock, &mut stream(1, 0)).unwrap();
        let ex = enumerate_joint_query(&net, &ev).unwrap().marginals.unwrap();
        assert!(out.marginals().unwrap().max_abs_diff(&ex).unwrap() < 0.01);
        assert_eq!(out.state.rejected(), 0);
    }

    #[test]
    fn weight_times_q_is_joint() {
        for seed in 0..10 {
            let net = generate_random_network(&GeneratorConfig::new(8, 2, 3, 0.3, seed));
            let leaf = net.leaves()[0];
            let ev = Evidence::from_pairs([(leaf, 0)]);
            let ord = build_cutset_order(&net, &ev, &find_loop_cutset(&net, &[leaf])).unwrap();
            let mut rng = stream(seed, 0);
            for _ in 0..20 {
                let s = lwlc_sample(&net, &ord, &mut rng).unwrap();
                let mut pairs: Vec<_> = ord.cutset().members().iter().filter_map(|&c| s.assignment[c].map(|x| (c, x))).collect();
                if s.is_rejected() {
                    continue;
                }
                pairs.push((leaf, 0));
                let joint = enumerate_joint_query(&net, &Evidence::from_pairs(pairs)).unwrap().evidence_probability;
                assert!((s.weight() * s.proposal_probability() - joint).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn impossible_evidence_always_rejected() {
        let net = BayesNet::new(
            vec![Variable::with_card("A", 2), Variable::with_card("B", 2)],
            vec![
                Cpt::new(0, vec![], vec![vec![1.0, 0.0]]),
                Cpt::new(1, vec![0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            ],
        )
        .unwrap();
        let ev = Evidence::from_pairs([(1, 1)]);
        let ord = build_cutset_order(&net, &ev, &Cutset::default()).unwrap();
        let out = lwlc_run(&net, &ord, Budget::Samples(50), CheckpointEvery::Never, &NoClock, &mut stream(0, 0)).unwrap();
        assert_eq!(out.state.rejection_rate().unwrap(), 1.0);
    }

    #[test]
    fn mixing_rows_normalized() {
        let net = diamond();
        let ord = build_cutset_order(&net, &Evidence::from_pairs([(3, 0)]), &Cutset::new(vec![0])).unwrap();
        let out = lwlc_run(&net, &ord, Budget::Samples(3), CheckpointEvery::Never, &NoClock, &mut stream(0, 0)).unwrap();
        for (_, d) in out.marginals().unwrap().iter() {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn recorded_weights_match_samples() {
        let net = skewed_diamond();
        let ev = Evidence::from_pairs([(3, 1)]);
        let ord = build_cutset_order(&net, &ev, &Cutset::new(vec![0])).unwrap();
        let mut s = LwlcSampler::new(&net, &ord);
        s.record_weights();
        let mut st = EstimatorState::new(&net, &ev);
        let mut rng = stream(2, 0);
        for _ in 0..5 {
            s.step(&mut rng, &mut st).unwrap();
        }
        let ws = s.take_weights();
        assert_eq!(ws.len(), 5);
        let total: f64 = ws.iter().map(|(lw, _)| exp(*lw)).sum();
        assert!((total - st.total_weight()).abs() < 1e-12);
    }
}
