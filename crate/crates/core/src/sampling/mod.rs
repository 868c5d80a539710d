//! Full-space samplers and the weighted-estimate machinery they share with
//! the cutset samplers.

mod estimator;
mod gibbs;
mod lw;
mod run;

pub use estimator::EstimatorState;
pub use gibbs::{gibbs_run, GibbsSampler, GIBBS_INIT_ATTEMPTS};
pub use lw::{lw_run, lw_sample, LwSampler};
pub use run::{drive, Budget, CheckpointEvery, Checkpoint, Clock, NoClock, RunOutput, Scheme};

use alloc::vec::Vec;

use thiserror::Error;

use crate::exact::ExactError;
use crate::model::{ModelError, VarId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    /// Every sample had weight 0 (rejection rate 100%).
    #[error("unresolved: all samples were rejected")]
    Unresolved,
    #[error("no samples were drawn")]
    NoSamples,
    #[error("burn-in of {burn_in} leaves nothing of a budget of {total} samples")]
    BurnInTooLarge { burn_in: u64, total: u64 },
    #[error("no positive-probability starting state found in {0} attempts")]
    NoInitialState(usize),
    #[error("cutset together with the evidence is not a loop-cutset")]
    InvalidCutset,
    #[error("variable {0} is both in the cutset and observed")]
    CutsetOverlapsEvidence(VarId),
    #[error("a time budget needs a running clock")]
    NeedsClock,
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One importance sample.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    /// Values by variable id: sampled and observed variables are `Some`,
    /// variables the scheme does not instantiate are `None`. A rejected
    /// cutset sample stops at the zero factor, leaving later cutset
    /// variables `None`.
    pub assignment: Vec<Option<usize>>,
    /// `ln w`; `-inf` for a rejected sample.
    pub log_weight: f64,
    /// Probability each sampled variable was drawn with, in sampling order.
    pub step_probs: Vec<f64>,
    /// Order position at which the weight became zero, if it did.
    pub zero_at: Option<usize>,
}

impl WeightedSample {
    pub fn weight(&self) -> f64 {
        crate::math::exp(self.log_weight)
    }

    pub fn is_rejected(&self) -> bool {
        self.log_weight == f64::NEG_INFINITY
    }

    /// Proposal probability of the sampled values, `Π step_probs`.
    pub fn proposal_probability(&self) -> f64 {
        self.step_probs.iter().product()
    }
}
