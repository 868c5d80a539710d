use alloc::vec;
use alloc::vec::Vec;

use super::run::{drive, Budget, CheckpointEvery, Clock, RunOutput, Scheme};
use super::{EstimatorState, SamplingError, WeightedSample};
use crate::math::ln;
use crate::model::{BayesNet, Evidence};
use crate::rng::{draw_index, StreamRng};

/// Likelihood weighting over every variable: unobserved variables are drawn
/// from `P(X_i | pa_i)` in topological order, observed ones are clamped and
/// contribute `P(e_i | pa_i)` to the weight.
#[derive(Debug, Clone)]
pub struct LwSampler<'a> {
    net: &'a BayesNet,
    observed: Vec<Option<usize>>,
    values: Vec<usize>,
    step_probs: Vec<f64>,
    log_weights: Option<Vec<(f64, f64)>>,
}

impl<'a> LwSampler<'a> {
    pub fn new(net: &'a BayesNet, evidence: &Evidence) -> Result<Self, SamplingError> {
        evidence.validate(net)?;
        Ok(LwSampler {
            net,
            observed: evidence.to_dense(net.len()),
            values: vec![0; net.len()],
            step_probs: Vec::new(),
            log_weights: None,
        })
    }

    /// Keeps `(ln w, ln Q)` of every sample drawn through [`Scheme::step`].
    /// For a rejected sample `ln Q` covers the variables drawn before the
    /// zero factor.
    pub fn record_weights(&mut self) {
        self.log_weights = Some(Vec::new());
    }

    pub fn take_weights(&mut self) -> Vec<(f64, f64)> {
        self.log_weights.as_mut().map(core::mem::take).unwrap_or_default()
    }

    /// Draws one sample into the internal buffer. Returns `ln w` and, for a
    /// rejected sample, the order position of the zero factor (the walk
    /// stops there).
    fn draw(&mut self, rng: &mut StreamRng, mut step_probs: Option<&mut Vec<f64>>) -> (f64, Option<usize>) {
        let mut log_w = 0.0;
        for (pos, &v) in self.net.topological_order().iter().enumerate() {
            let row = self.net.cpt_row_index(v, &self.values);
            let dist = self.net.cpt(v).row(row);
            match self.observed[v] {
                Some(e) => {
                    let f = dist[e];
                    self.values[v] = e;
                    if f == 0.0 {
                        return (f64::NEG_INFINITY, Some(pos));
                    }
                    log_w += ln(f);
                }
                None => {
                    let x = draw_index(rng, dist).expect("validated CPT rows carry mass");
                    self.values[v] = x;
                    if let Some(sp) = step_probs.as_deref_mut() {
                        sp.push(dist[x]);
                    }
                }
            }
        }
        (log_w, None)
    }

    pub fn sample(&mut self, rng: &mut StreamRng) -> WeightedSample {
        let mut step_probs = Vec::new();
        let (log_weight, zero_at) = self.draw(rng, Some(&mut step_probs));
        let mut assignment: Vec<Option<usize>> = self.values.iter().map(|&x| Some(x)).collect();
        if let Some(pos) = zero_at {
            for &v in &self.net.topological_order()[pos + 1..] {
                assignment[v] = None;
            }
        }
        WeightedSample {
            assignment,
            log_weight,
            step_probs,
            zero_at,
        }
    }
}

impl Scheme for LwSampler<'_> {
    fn step(&mut self, rng: &mut StreamRng, state: &mut EstimatorState) -> Result<(), SamplingError> {
        let log_w = if self.log_weights.is_some() {
            let mut sp = core::mem::take(&mut self.step_probs);
            sp.clear();
            let (log_w, _) = self.draw(rng, Some(&mut sp));
            let log_q = sp.iter().map(|&p| ln(p)).sum();
            self.step_probs = sp;
            self.log_weights.as_mut().expect("checked above").push((log_w, log_q));
            log_w
        } else {
            self.draw(rng, None).0
        };
        if let Some(f) = state.accept(log_w) {
            for v in 0..self.net.len() {
                if self.observed[v].is_none() {
                    state.add_indicator(v, self.values[v], f);
                }
            }
        }
        Ok(())
    }
}

/// One likelihood-weighting sample.
pub fn lw_sample(net: &BayesNet, evidence: &Evidence, rng: &mut StreamRng) -> Result<WeightedSample, SamplingError> {
    Ok(LwSampler::new(net, evidence)?.sample(rng))
}

/// Repeated likelihood weighting. An all-rejected run still succeeds; the
/// final `marginals()` call reports it as unresolved.
pub fn lw_run(
    net: &BayesNet,
    evidence: &Evidence,
    budget: Budget,
    every: CheckpointEvery,
    clock: &dyn Clock,
    rng: &mut StreamRng,
) -> Result<RunOutput, SamplingError> {
    let mut s = LwSampler::new(net, evidence)?;
    drive(&mut s, EstimatorState::new(net, evidence), budget, every, clock, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::enumerate_joint_query;
    use crate::model::{generate_random_network, Cpt, GeneratorConfig, Variable};
    use crate::rng::stream;
    use crate::sampling::NoClock;

    fn chain() -> BayesNet {
        BayesNet::new(
            vec![Variable::with_card("A", 2), Variable::with_card("B", 2)],
            vec![
                Cpt::new(0, vec![], vec![vec![0.7, 0.3]]),
                Cpt::new(1, vec![0], vec![vec![0.9, 0.1], vec![0.2, 0.8]]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn weight_is_evidence_factor() {
        let net = chain();
        let ev = Evidence::from_pairs([(1, 1)]);
        let mut rng = stream(1, 0);
        for _ in 0..50 {
            let s = lw_sample(&net, &ev, &mut rng).unwrap();
            let expect = if s.assignment[0] == Some(1) { 0.8 } else { 0.1 };
            assert!((s.weight() - expect).abs() < 1e-15);
            assert_eq!(s.step_probs.len(), 1);
        }
    }

    #[test]
    fn no_evidence_weight_one() {
        let net = generate_random_network(&GeneratorConfig::new(8, 2, 3, 0.0, 3));
        let mut rng = stream(4, 0);
        for _ in 0..20 {
            assert_eq!(lw_sample(&net, &Evidence::new(), &mut rng).unwrap().weight(), 1.0);
        }
    }

    #[test]
    fn impossible_evidence_weight_zero() {
        let net = BayesNet::new(
            vec![Variable::with_card("A", 2), Variable::with_card("B", 2)],
            vec![
                Cpt::new(0, vec![], vec![vec![1.0, 0.0]]),
                Cpt::new(1, vec![0], vec![vec![1.0, 0.0], vec![0.5, 0.5]]),
            ],
        )
        .unwrap();
        let ev = Evidence::from_pairs([(1, 1)]);
        let out = lw_run(&net, &ev, Budget::Samples(100), CheckpointEvery::Never, &NoClock, &mut stream(0, 0)).unwrap();
        assert_eq!(out.state.rejection_rate().unwrap(), 1.0);
        assert_eq!(out.marginals().unwrap_err(), SamplingError::Unresolved);
    }

    #[test]
    fn chain_posterior() {
        let net = chain();
        let ev = Evidence::from_pairs([(1, 1)]);
        let out = lw_run(&net, &ev, Budget::Samples(200_000), CheckpointEvery::Never, &NoClock, &mut stream(7, 0)).unwrap();
        let p = out.marginals().unwrap().get(0).unwrap()[1];
        assert!((p - 0.7742).abs() < 0.01, "{p}");
    }

    #[test]
    fn zero_budget_unresolved() {
        let out = lw_run(&chain(), &Evidence::new(), Budget::Samples(0), CheckpointEvery::Never, &NoClock, &mut stream(0, 0)).unwrap();
        assert_eq!(out.state.samples(), 0);
        assert!(out.marginals().is_err());
    }

    #[test]
    fn support_covers_target() {
        // every positive-probability completion of the evidence is drawable
        let net = generate_random_network(&GeneratorConfig::new(6, 2, 2, 0.3, 11));
        let ev = Evidence::from_pairs([(net.leaves()[0], 0)]);
        let mut rng = stream(2, 0);
        let mut seen = alloc::collections::BTreeSet::new();
        for _ in 0..20_000 {
            let s = lw_sample(&net, &ev, &mut rng).unwrap();
            if !s.is_rejected() {
                seen.insert(s.assignment.iter().map(|x| x.unwrap()).collect::<Vec<_>>());
            }
        }
        let mut od = crate::model::Odometer::new(net.cards());
        while let Some(a) = od.current() {
            if a[net.leaves()[0]] == 0 && net.joint_probability(a) > 1e-3 {
                assert!(seen.contains(a), "{a:?} never drawn");
            }
            od.advance();
        }
        assert!(enumerate_joint_query(&net, &ev).is_ok());
    }

    #[test]
    fn checkpoints_every_k() {
        let out = lw_run(&chain(), &Evidence::new(), Budget::Samples(100), CheckpointEvery::Samples(25), &NoClock, &mut stream(0, 0)).unwrap();
        let counts: Vec<u64> = out.trace.iter().map(|c| c.samples).collect();
        assert_eq!(counts, [25, 50, 75, 100]);
    }

    #[test]
    fn time_budget_needs_clock() {
        let e = lw_run(&chain(), &Evidence::new(), Budget::Millis(5.0), CheckpointEvery::Never, &NoClock, &mut stream(0, 0)).unwrap_err();
        assert_eq!(e, SamplingError::NeedsClock);
    }

    #[test]
    fn same_seed_same_samples() {
        let net = generate_random_network(&GeneratorConfig::new(9, 3, 3, 0.2, 1));
        let ev = Evidence::from_pairs([(net.leaves()[0], 1)]);
        let mut a = stream(5, 3);
        let mut b = stream(5, 3);
        for _ in 0..100 {
            assert_eq!(lw_sample(&net, &ev, &mut a).unwrap(), lw_sample(&net, &ev, &mut b).unwrap());
        }
    }

    #[test]
    fn recorded_weights_leave_run_unchanged() {
        let net = chain();
        let ev = Evidence::from_pairs([(1, 1)]);
        let plain = lw_run(&net, &ev, Budget::Samples(500), CheckpointEvery::Never, &NoClock, &mut stream(2, 0)).unwrap();
        let mut s = LwSampler::new(&net, &ev).unwrap();
        s.record_weights();
        let rec = drive(&mut s, EstimatorState::new(&net, &ev), Budget::Samples(500), CheckpointEvery::Never, &NoClock, &mut stream(2, 0)).unwrap();
        assert_eq!(plain.state, rec.state);
        let w = s.take_weights();
        assert_eq!(w.len(), 500);
        for (log_w, log_q) in w {
            // B is clamped, so Q(a) = P(a) and w = P(B=1 | a)
            let a_prob = crate::math::exp(log_q);
            assert!((a_prob - 0.7).abs() < 1e-12 || (a_prob - 0.3).abs() < 1e-12);
            let w = crate::math::exp(log_w);
            assert!((w - 0.1).abs() < 1e-12 || (w - 0.8).abs() < 1e-12);
        }
    }
}
