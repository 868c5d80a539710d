use alloc::vec::Vec;

use super::{EstimatorState, SamplingError};
use crate::exact::Marginals;
use crate::rng::StreamRng;

/// Milliseconds since the start of a run. The std crate provides a
/// wall-clock implementation; [`NoClock`] serves sample-count budgets.
pub trait Clock {
    fn elapsed_ms(&self) -> f64;

    /// Whether the clock actually advances.
    fn is_running(&self) -> bool {
        true
    }
}

/// A clock frozen at 0 ms.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_ms(&self) -> f64 {
        0.0
    }

    fn is_running(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Samples(u64),
    Millis(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CheckpointEvery {
    Never,
    Samples(u64),
    Millis(f64),
}

/// Snapshot of a run in progress.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub elapsed_ms: f64,
    pub samples: u64,
    pub rejected: u64,
    /// `None` while every sample so far has been rejected.
    pub marginals: Option<Marginals>,
}

impl Checkpoint {
    pub fn rejection_rate(&self) -> Option<f64> {
        (self.samples > 0).then(|| self.rejected as f64 / self.samples as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub state: EstimatorState,
    pub trace: Vec<Checkpoint>,
    /// Set when the run proved `P(e) = 0` exactly.
    pub unsatisfiable: bool,
}

impl RunOutput {
    pub fn marginals(&self) -> Result<Marginals, SamplingError> {
        self.state.estimate_marginals()
    }
}

/// One sampling step of a scheme: draws a sample and folds it into `state`.
pub trait Scheme {
    fn step(&mut self, rng: &mut StreamRng, state: &mut EstimatorState) -> Result<(), SamplingError>;

    /// True once the scheme has proved the evidence impossible; the driver
    /// then stops early.
    fn unsatisfiable(&self) -> bool {
        false
    }
}

/// Runs `scheme` until the budget is spent, recording checkpoints along the
/// way and always one at the end.
pub fn drive<S: Scheme + ?Sized>(
    scheme: &mut S,
    mut state: EstimatorState,
    budget: Budget,
    every: CheckpointEvery,
    clock: &dyn Clock,
    rng: &mut StreamRng,
) -> Result<RunOutput, SamplingError> {
    let timed = matches!(budget, Budget::Millis(_)) || matches!(every, CheckpointEvery::Millis(_));
    if timed && !clock.is_running() {
        return Err(SamplingError::NeedsClock);
    }
    let snapshot = |state: &EstimatorState| Checkpoint {
        elapsed_ms: clock.elapsed_ms(),
        samples: state.samples(),
        rejected: state.rejected(),
        marginals: state.estimate_marginals().ok(),
    };
    let mut trace = Vec::new();
    let mut next_ms = match every {
        CheckpointEvery::Millis(ms) if ms > 0.0 => ms,
        _ => f64::INFINITY,
    };
    let start = state.samples();
    loop {
        let drawn = state.samples() - start;
        let done = match budget {
            Budget::Samples(t) => drawn >= t,
            Budget::Millis(ms) => clock.elapsed_ms() >= ms,
        };
        if done || scheme.unsatisfiable() {
            break;
        }
        scheme.step(rng, &mut state)?;
        let drawn = drawn + 1;
        match every {
            CheckpointEvery::Samples(k) if k > 0 && drawn.is_multiple_of(k) => trace.push(snapshot(&state)),
            CheckpointEvery::Millis(ms) if ms > 0.0 => {
                let now = clock.elapsed_ms();
                if now >= next_ms {
                    trace.push(snapshot(&state));
                    while next_ms <= now {
                        next_ms += ms;
                    }
                }
            }
            _ => {}
        }
    }
    if trace.last().is_none_or(|c| c.samples != state.samples()) {
        trace.push(snapshot(&state));
    }
    Ok(RunOutput {
        state,
        trace,
        unsatisfiable: scheme.unsatisfiable(),
    })
}
