use alloc::vec::Vec;

use super::lw::LwSampler;
use super::run::{drive, Budget, CheckpointEvery, NoClock, RunOutput, Scheme};
use super::{EstimatorState, SamplingError};
use crate::model::{BayesNet, Evidence, VarId};
use crate::rng::{draw_index, StreamRng};

/// Forward draws tried when looking for a starting state of positive
/// probability.
pub const GIBBS_INIT_ATTEMPTS: usize = 10_000;

/// Systematic-scan Gibbs sampling over the unobserved variables in
/// ascending id order. One sweep is one sample; the first `burn_in` sweeps
/// are discarded.
#[derive(Debug, Clone)]
pub struct GibbsSampler<'a> {
    net: &'a BayesNet,
    free: Vec<VarId>,
    values: Vec<usize>,
    burn_in: u64,
    scratch: Vec<f64>,
}

impl<'a> GibbsSampler<'a> {
    /// Starts from the first likelihood-weighting draw with positive weight.
    pub fn new(net: &'a BayesNet, evidence: &Evidence, burn_in: u64, rng: &mut StreamRng) -> Result<Self, SamplingError> {
        let mut lw = LwSampler::new(net, evidence)?;
        let start = (0..GIBBS_INIT_ATTEMPTS)
            .map(|_| lw.sample(rng))
            .find(|s| !s.is_rejected())
            .ok_or(SamplingError::NoInitialState(GIBBS_INIT_ATTEMPTS))?;
        Ok(GibbsSampler {
            net,
            free: (0..net.len()).filter(|&v| !evidence.contains(v)).collect(),
            values: start.assignment.into_iter().map(|x| x.unwrap_or(0)).collect(),
            burn_in,
            scratch: Vec::new(),
        })
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    /// Resamples `v` from `P(v | markov blanket)`.
    fn resample(&mut self, v: VarId, rng: &mut StreamRng) {
        let net = self.net;
        let card = net.card(v);
        self.scratch.clear();
        self.scratch.resize(card, 0.0);
        for x in 0..card {
            self.values[v] = x;
            let mut p = net.prob(v, x, &self.values);
            for &c in net.children(v) {
                if p == 0.0 {
                    break;
                }
                p *= net.prob(c, self.values[c], &self.values);
            }
            self.scratch[x] = p;
        }
        // the current state has positive probability, so some value does
        self.values[v] = draw_index(rng, &self.scratch).expect("current value keeps positive mass");
    }

    fn sweep(&mut self, rng: &mut StreamRng) {
        for i in 0..self.free.len() {
            self.resample(self.free[i], rng);
        }
    }
}

impl Scheme for GibbsSampler<'_> {
    fn step(&mut self, rng: &mut StreamRng, state: &mut EstimatorState) -> Result<(), SamplingError> {
        while self.burn_in > 0 {
            self.sweep(rng);
            self.burn_in -= 1;
        }
        self.sweep(rng);
        let f = state.accept(0.0).expect("Gibbs samples are unweighted");
        for &v in &self.free {
            state.add_indicator(v, self.values[v], f);
        }
        Ok(())
    }
}

/// `total` sweeps of which the first `burn_in` are discarded; marginals are
/// the empirical frequencies of the rest.
pub fn gibbs_run(net: &BayesNet, evidence: &Evidence, total: u64, burn_in: u64, rng: &mut StreamRng) -> Result<RunOutput, SamplingError> {
    if burn_in >= total {
        return Err(SamplingError::BurnInTooLarge { burn_in, total });
    }
    let mut g = GibbsSampler::new(net, evidence, burn_in, rng)?;
    drive(
        &mut g,
        EstimatorState::new(net, evidence),
        Budget::Samples(total - burn_in),
        CheckpointEvery::Never,
        &NoClock,
        rng,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::model::{Cpt, Variable};
    use crate::rng::stream;

    #[test]
    fn single_variable_prior() {
        let net = BayesNet::new(vec![Variable::with_card("X", 3)], vec![Cpt::new(0, vec![], vec![vec![0.2, 0.5, 0.3]])]).unwrap();
        let out = gibbs_run(&net, &Evidence::new(), 200_000, 100, &mut stream(3, 0)).unwrap();
        let m = out.marginals().unwrap();
        for (a, b) in m.get(0).unwrap().iter().zip([0.2, 0.5, 0.3]) {
            assert!((a - b).abs() < 0.01);
        }
    }

    #[test]
    fn chain_posterior() {
        let net = BayesNet::new(
            vec![Variable::with_card("A", 2), Variable::with_card("B", 2)],
            vec![
                Cpt::new(0, vec![], vec![vec![0.7, 0.3]]),
                Cpt::new(1, vec![0], vec![vec![0.9, 0.1], vec![0.2, 0.8]]),
            ],
        )
        .unwrap();
        let out = gibbs_run(&net, &Evidence::from_pairs([(1, 1)]), 200_000, 1000, &mut stream(9, 0)).unwrap();
        let p = out.marginals().unwrap().get(0).unwrap()[1];
        assert!((p - 0.7742).abs() < 0.01, "{p}");
        assert_eq!(out.state.samples(), 199_000);
    }

    #[test]
    fn burn_in_must_leave_samples() {
        let net = BayesNet::new(vec![Variable::with_card("X", 2)], vec![Cpt::new(0, vec![], vec![vec![0.5, 0.5]])]).unwrap();
        let e = gibbs_run(&net, &Evidence::new(), 10, 10, &mut stream(0, 0)).unwrap_err();
        assert_eq!(e, SamplingError::BurnInTooLarge { burn_in: 10, total: 10 });
    }

    #[test]
    fn impossible_evidence_has_no_start() {
        let net = BayesNet::new(
            vec![Variable::with_card("A", 2), Variable::with_card("B", 2)],
            vec![
                Cpt::new(0, vec![], vec![vec![1.0, 0.0]]),
                Cpt::new(1, vec![0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            ],
        )
        .unwrap();
        let e = GibbsSampler::new(&net, &Evidence::from_pairs([(1, 1)]), 0, &mut stream(0, 0)).unwrap_err();
        assert_eq!(e, SamplingError::NoInitialState(GIBBS_INIT_ATTEMPTS));
    }
}
