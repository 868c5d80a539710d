use alloc::vec::Vec;

use super::lwlc::{mixing_marginals, LwlcSampler};
use super::CutsetOrder;
use crate::exact::polytree_log_evidence;
use crate::math::exp;
use crate::model::{BayesNet, VarId};
use crate::rng::{draw_index, StreamRng};
use crate::sampling::{drive, Budget, CheckpointEvery, EstimatorState, NoClock, RunOutput, SamplingError, Scheme, GIBBS_INIT_ATTEMPTS};

/// Gibbs sampling over the cutset variables. Each conditional
/// `P(c_i | c_{-i}, e)` comes from exact poly-tree evidence probabilities;
/// non-cutset marginals are the unweighted average of `P(x_i | c, e)`.
#[derive(Debug, Clone)]
pub struct LcsSampler<'a> {
    net: &'a BayesNet,
    order: &'a CutsetOrder,
    cutset: Vec<VarId>,
    observed: Vec<Option<usize>>,
    burn_in: u64,
    logp: Vec<f64>,
}

impl<'a> LcsSampler<'a> {
    /// Starts from the first LWLC sample with positive weight.
    pub fn new(net: &'a BayesNet, order: &'a CutsetOrder, burn_in: u64, rng: &mut StreamRng) -> Result<Self, SamplingError> {
        let mut lwlc = LwlcSampler::new(net, order);
        let mut start = None;
        for _ in 0..GIBBS_INIT_ATTEMPTS {
            let s = lwlc.sample(rng)?;
            if !s.is_rejected() {
                start = Some(s.assignment);
                break;
            }
        }
        Ok(LcsSampler {
            net,
            order,
            cutset: order.cutset().members().to_vec(),
            observed: start.ok_or(SamplingError::NoInitialState(GIBBS_INIT_ATTEMPTS))?,
            burn_in,
            logp: Vec::new(),
        })
    }

    fn sweep(&mut self, rng: &mut StreamRng) -> Result<(), SamplingError> {
        let kept = self.order.z_mask();
        for &c in &self.cutset {
            self.logp.clear();
            for x in 0..self.net.card(c) {
                self.observed[c] = Some(x);
                self.logp.push(polytree_log_evidence(self.net, kept, &self.observed)?);
            }
            let top = self.logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let p: Vec<f64> = self.logp.iter().map(|&l| exp(l - top)).collect();
            self.observed[c] = Some(draw_index(rng, &p).expect("the current value keeps positive mass"));
        }
        Ok(())
    }
}

impl Scheme for LcsSampler<'_> {
    fn step(&mut self, rng: &mut StreamRng, state: &mut EstimatorState) -> Result<(), SamplingError> {
        while self.burn_in > 0 {
            self.sweep(rng)?;
            self.burn_in -= 1;
        }
        self.sweep(rng)?;
        let f = state.accept(0.0).expect("Gibbs samples are unweighted");
        for &c in &self.cutset {
            state.add_indicator(c, self.observed[c].expect("cutset is instantiated"), f);
        }
        for (v, d) in mixing_marginals(self.net, &self.observed)?.iter() {
            state.add_soft(v, d, f);
        }
        Ok(())
    }
}

/// `total` sweeps over the cutset, the first `burn_in` discarded.
pub fn lcs_run(net: &BayesNet, order: &CutsetOrder, total: u64, burn_in: u64, rng: &mut StreamRng) -> Result<RunOutput, SamplingError> {
    if burn_in >= total {
        return Err(SamplingError::BurnInTooLarge { burn_in, total });
    }
    let mut s = LcsSampler::new(net, order, burn_in, rng)?;
    drive(
        &mut s,
        EstimatorState::new(net, order.evidence()),
        Budget::Samples(total - burn_in),
        CheckpointEvery::Never,
        &NoClock,
        rng,
    )
}
