use alloc::vec;
use alloc::vec::Vec;

use super::SamplingError;
use crate::exact::Marginals;
use crate::math::{exp, ln};
use crate::model::{BayesNet, Evidence, VarId};

/// Weighted tallies `Σ_t w_t·δ(x_i, x_t)` (or soft contributions
/// `Σ_t w_t·P(x_i | ...)`) together with `Σ_t w_t`.
///
/// Weights arrive as logarithms. Tallies are stored relative to the largest
/// weight seen so far (`log_scale`), so tiny evidence probabilities neither
/// underflow nor lose precision.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    tallies: Vec<Vec<f64>>,
    total: f64,
    log_scale: f64,
    samples: u64,
    rejected: u64,
}

impl EstimatorState {
    /// Tallies for every unobserved variable.
    pub fn new(net: &BayesNet, evidence: &Evidence) -> Self {
        let tallies = (0..net.len())
            .map(|v| if evidence.contains(v) { Vec::new() } else { vec![0.0; net.card(v)] })
            .collect();
        EstimatorState {
            tallies,
            total: 0.0,
            log_scale: f64::NEG_INFINITY,
            samples: 0,
            rejected: 0,
        }
    }

    /// Registers one sample of weight `exp(log_weight)`. Returns the factor
    /// to multiply its contributions by, or `None` for a rejected sample.
    pub fn accept(&mut self, log_weight: f64) -> Option<f64> {
        self.samples += 1;
        if log_weight == f64::NEG_INFINITY {
            self.rejected += 1;
            return None;
        }
        if log_weight > self.log_scale {
            let r = exp(self.log_scale - log_weight);
            if r != 1.0 {
                self.total *= r;
                for t in &mut self.tallies {
                    for x in t.iter_mut() {
                        *x *= r;
                    }
                }
            }
            self.log_scale = log_weight;
        }
        let f = exp(log_weight - self.log_scale);
        self.total += f;
        Some(f)
    }

    #[inline]
    pub fn add_indicator(&mut self, v: VarId, value: usize, factor: f64) {
        self.tallies[v][value] += factor;
    }

    pub fn add_soft(&mut self, v: VarId, dist: &[f64], factor: f64) {
        for (t, &p) in self.tallies[v].iter_mut().zip(dist) {
            *t += factor * p;
        }
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    /// `Σ_t w_t`.
    pub fn total_weight(&self) -> f64 {
        if self.total == 0.0 {
            0.0
        } else {
            self.total * exp(self.log_scale)
        }
    }

    /// `ln Σ_t w_t`.
    pub fn log_total_weight(&self) -> f64 {
        if self.total == 0.0 {
            f64::NEG_INFINITY
        } else {
            ln(self.total) + self.log_scale
        }
    }

    /// `P̂(e) = (1/T) Σ_t w_t`.
    pub fn evidence_estimate(&self) -> Result<f64, SamplingError> {
        if self.samples == 0 {
            return Err(SamplingError::NoSamples);
        }
        Ok(exp(self.log_total_weight() - ln(self.samples as f64)))
    }

    /// Fraction of samples with weight 0.
    pub fn rejection_rate(&self) -> Result<f64, SamplingError> {
        if self.samples == 0 {
            return Err(SamplingError::NoSamples);
        }
        Ok(self.rejected as f64 / self.samples as f64)
    }

    /// `P̂(x_i | e) = Σ_t w_t·δ(x_i, x_t) / Σ_t w_t` for every tracked
    /// variable.
    pub fn estimate_marginals(&self) -> Result<Marginals, SamplingError> {
        if !(self.total > 0.0) {
            return Err(SamplingError::Unresolved);
        }
        let mut m = Marginals::new(self.tallies.len());
        for (v, t) in self.tallies.iter().enumerate() {
            if !t.is_empty() {
                m.set(v, t.iter().map(|x| x / self.total).collect());
            }
        }
        Ok(m)
    }

    /// Adds another state's samples (e.g. from an independent chain).
    pub fn merge(&mut self, other: &EstimatorState) {
        self.samples += other.samples;
        self.rejected += other.rejected;
        if other.total == 0.0 {
            return;
        }
        if other.log_scale > self.log_scale {
            let r = exp(self.log_scale - other.log_scale);
            self.total *= r;
            for t in &mut self.tallies {
                t.iter_mut().for_each(|x| *x *= r);
            }
            self.log_scale = other.log_scale;
        }
        let r = exp(other.log_scale - self.log_scale);
        self.total += other.total * r;
        for (a, b) in self.tallies.iter_mut().zip(&other.tallies) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y * r;
            }
        }
    }
}
