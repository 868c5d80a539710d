//! Running schemes on one instance: wall-clock timing, scoring against an
//! exact reference and fan-out over seeds.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Instant;

use clap::ValueEnum;
use lwlc_core::cache::{BufferOptions, CacheStats};
use lwlc_core::cutset::{CutsetOrder, LcsSampler, LwlcSampler};
use lwlc_core::eval::{mse, ConvergenceTrace, EvalError, TraceRow};
use lwlc_core::exact::{bucket_elimination_query, iterative_bp, ExactError, Marginals};
use lwlc_core::rng::{stream, StreamRng};
use lwlc_core::sampling::{drive, Budget, Checkpoint, CheckpointEvery, Clock, EstimatorState, GibbsSampler, LwSampler, RunOutput, SamplingError, Scheme};
use lwlc_core::{BayesNet, Evidence};
use thiserror::Error;

/// Milliseconds since construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        WallClock(Instant::now())
    }
}

impl Clock for WallClock {
    fn elapsed_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum)]
pub enum SchemeKind {
    Lw,
    Gibbs,
    Lwlc,
    Lcs,
    LwlcBuf,
    Ibp,
    Exact,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Lw => "lw",
            SchemeKind::Gibbs => "gibbs",
            SchemeKind::Lwlc => "lwlc",
            SchemeKind::Lcs => "lcs",
            SchemeKind::LwlcBuf => "lwlc-buf",
            SchemeKind::Ibp => "ibp",
            SchemeKind::Exact => "exact",
        }
    }

    pub fn uses_cutset(self) -> bool {
        matches!(self, SchemeKind::Lwlc | SchemeKind::Lcs | SchemeKind::LwlcBuf)
    }

    /// Draws samples under a budget (everything but `ibp` and `exact`).
    pub fn is_sampler(self) -> bool {
        !matches!(self, SchemeKind::Ibp | SchemeKind::Exact)
    }

    /// Importance samplers, whose weights can be recorded and whose
    /// independent runs can be pooled.
    pub fn is_weighted(self) -> bool {
        matches!(self, SchemeKind::Lw | SchemeKind::Lwlc | SchemeKind::LwlcBuf)
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scheme `{0}` needs a loop-cutset")]
    NoCutset(&'static str),
    #[error("the evidence has probability 0, so there is no exact posterior to score against")]
    NoReference,
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// The problem every scheme in a comparison works on.
#[derive(Debug, Clone, Copy)]
pub struct Instance<'a> {
    pub net: &'a BayesNet,
    pub evidence: &'a Evidence,
    /// Required by the cutset schemes.
    pub order: Option<&'a CutsetOrder>,
    /// Exact posterior used for the MSE column.
    pub reference: Option<&'a Marginals>,
}

#[derive(Debug, Clone, Copy)]
pub struct RunSpec {
    pub budget: Budget,
    pub every: CheckpointEvery,
    /// Sweeps discarded by `gibbs` and `lcs` before the budget starts.
    pub burn_in: u64,
    pub buffer: BufferOptions,
    pub record_weights: bool,
    pub ibp_max_iters: usize,
    pub ibp_tol: f64,
}

impl RunSpec {
    pub fn new(budget: Budget) -> Self {
        RunSpec {
            budget,
            every: CheckpointEvery::Never,
            burn_in: 0,
            buffer: BufferOptions::default(),
            record_weights: false,
            ibp_max_iters: 1000,
            ibp_tol: 1e-9,
        }
    }
}

/// One scheme run under one seed.
#[derive(Debug, Clone)]
pub struct SchemeRun {
    pub scheme: SchemeKind,
    pub seed: u64,
    pub trace: ConvergenceTrace,
    pub samples: u64,
    pub rejected: u64,
    /// Final estimate; `None` when unresolved.
    pub marginals: Option<Marginals>,
    pub cache: Option<CacheStats>,
    pub unsatisfiable: bool,
    /// `(ln w, ln Q)` per sample when recording was requested.
    pub weights: Vec<(f64, f64)>,
}

impl SchemeRun {
    pub fn rejection_rate(&self) -> Option<f64> {
        (self.scheme.is_sampler() && self.samples > 0).then(|| self.rejected as f64 / self.samples as f64)
    }

    pub fn final_mse(&self) -> Option<f64> {
        self.trace.last().and_then(|r| r.mse)
    }
}

struct Part {
    out: RunOutput,
    elapsed_ms: f64,
    weights: Vec<(f64, f64)>,
    cache: Option<CacheStats>,
}

fn order_of<'a>(inst: &Instance<'a>, scheme: SchemeKind) -> Result<&'a CutsetOrder, HarnessError> {
    inst.order.ok_or(HarnessError::NoCutset(scheme.name()))
}

/// Runs a sampler with its own clock, started after construction so that
/// setup is not timed.
fn timed<S: Scheme>(s: &mut S, inst: &Instance<'_>, budget: Budget, every: CheckpointEvery, rng: &mut StreamRng) -> Result<(RunOutput, f64), SamplingError> {
    let clock = WallClock::start();
    let out = drive(s, EstimatorState::new(inst.net, inst.evidence), budget, every, &clock, rng)?;
    Ok((out, clock.elapsed_ms()))
}

fn sample_part(inst: &Instance<'_>, scheme: SchemeKind, spec: &RunSpec, budget: Budget, every: CheckpointEvery, rng: &mut StreamRng) -> Result<Part, HarnessError> {
    let part = |(out, elapsed_ms), weights, cache| Part {
        out,
        elapsed_ms,
        weights,
        cache,
    };
    Ok(match scheme {
        SchemeKind::Lw => {
            let mut s = LwSampler::new(inst.net, inst.evidence)?;
            if spec.record_weights {
                s.record_weights();
            }
            let r = timed(&mut s, inst, budget, every, rng)?;
            part(r, s.take_weights(), None)
        }
        SchemeKind::Gibbs => {
            let mut s = GibbsSampler::new(inst.net, inst.evidence, spec.burn_in, rng)?;
            part(timed(&mut s, inst, budget, every, rng)?, Vec::new(), None)
        }
        SchemeKind::Lwlc | SchemeKind::LwlcBuf => {
            let order = order_of(inst, scheme)?;
            let mut s = if scheme == SchemeKind::LwlcBuf {
                LwlcSampler::buffered(inst.net, order, spec.buffer)
            } else {
                LwlcSampler::new(inst.net, order)
            };
            if spec.record_weights {
                s.record_weights();
            }
            let r = timed(&mut s, inst, budget, every, rng)?;
            part(r, s.take_weights(), s.cache_stats())
        }
        SchemeKind::Lcs => {
            let mut s = LcsSampler::new(inst.net, order_of(inst, scheme)?, spec.burn_in, rng)?;
            part(timed(&mut s, inst, budget, every, rng)?, Vec::new(), None)
        }
        SchemeKind::Ibp | SchemeKind::Exact => unreachable!("not a sampler"),
    })
}

fn score(inst: &Instance<'_>, m: Option<&Marginals>) -> Result<Option<f64>, EvalError> {
    match (inst.reference, m) {
        (Some(ex), Some(est)) => mse(ex, est).map(Some),
        _ => Ok(None),
    }
}

/// A deterministic algorithm: one trace row, no sampling axis.
fn single_row(inst: &Instance<'_>, scheme: SchemeKind, seed: u64, t_ms: f64, marginals: Option<Marginals>) -> Result<SchemeRun, HarnessError> {
    let row = TraceRow {
        scheme: scheme.name().into(),
        seed,
        t_ms,
        samples: 0,
        rejected: 0,
        mse: score(inst, marginals.as_ref())?,
        unresolved: marginals.is_none(),
    };
    Ok(SchemeRun {
        scheme,
        seed,
        trace: ConvergenceTrace { rows: vec![row] },
        samples: 0,
        rejected: 0,
        marginals,
        cache: None,
        unsatisfiable: false,
        weights: Vec::new(),
    })
}

/// Runs `scheme` once. Samplers draw from stream 0 of `seed`, so two
/// schemes that consume randomness identically (`lwlc` and `lwlc-buf`
/// without dead-end learning) produce identical traces.
pub fn run_scheme(inst: &Instance<'_>, scheme: SchemeKind, seed: u64, spec: &RunSpec) -> Result<SchemeRun, HarnessError> {
    match scheme {
        SchemeKind::Exact => {
            let clock = WallClock::start();
            let q = bucket_elimination_query(inst.net, inst.evidence)?;
            single_row(inst, scheme, seed, clock.elapsed_ms(), q.marginals)
        }
        SchemeKind::Ibp => {
            let clock = WallClock::start();
            let r = iterative_bp(inst.net, inst.evidence, spec.ibp_max_iters, spec.ibp_tol)?;
            single_row(inst, scheme, seed, clock.elapsed_ms(), r.marginals)
        }
        _ => {
            let p = sample_part(inst, scheme, spec, spec.budget, spec.every, &mut stream(seed, 0))?;
            Ok(SchemeRun {
                scheme,
                seed,
                trace: ConvergenceTrace::from_checkpoints(scheme.name(), seed, &p.out.trace, inst.reference)?,
                samples: p.out.state.samples(),
                rejected: p.out.state.rejected(),
                marginals: p.out.marginals().ok(),
                cache: p.cache,
                unsatisfiable: p.out.unsatisfiable,
                weights: p.weights,
            })
        }
    }
}

/// Importance sampling split over `threads` independent streams of `seed`
/// and pooled into one estimate. The sample budget is divided between the
/// threads, a time budget applies to each. The trace is the single pooled
/// final row. With one thread this is [`run_scheme`].
pub fn run_pooled(inst: &Instance<'_>, scheme: SchemeKind, seed: u64, spec: &RunSpec, threads: usize) -> Result<SchemeRun, HarnessError> {
    let threads = threads.max(1);
    if threads == 1 || !scheme.is_weighted() {
        return run_scheme(inst, scheme, seed, spec);
    }
    let budget_of = |i: usize| match spec.budget {
        Budget::Samples(n) => {
            let t = threads as u64;
            Budget::Samples(n / t + u64::from((i as u64) < n % t))
        }
        b => b,
    };
    let parts: Vec<Result<Part, HarnessError>> = thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|i| s.spawn(move || sample_part(inst, scheme, spec, budget_of(i), CheckpointEvery::Never, &mut stream(seed, i as u64))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("sampler thread panicked")).collect()
    });
    let mut state = EstimatorState::new(inst.net, inst.evidence);
    let mut elapsed_ms: f64 = 0.0;
    let mut weights = Vec::new();
    let mut cache: Option<CacheStats> = None;
    let mut unsatisfiable = false;
    for p in parts {
        let p = p?;
        state.merge(&p.out.state);
        elapsed_ms = elapsed_ms.max(p.elapsed_ms);
        weights.extend(p.weights);
        unsatisfiable |= p.out.unsatisfiable;
        if let Some(c) = p.cache {
            let a = cache.get_or_insert_with(CacheStats::default);
            a.nodes += c.nodes;
            a.unique_tuples += c.unique_tuples;
            a.hits += c.hits;
            a.misses += c.misses;
            a.dead_ends_marked += c.dead_ends_marked;
        }
    }
    let marginals = state.estimate_marginals().ok();
    let last = Checkpoint {
        elapsed_ms,
        samples: state.samples(),
        rejected: state.rejected(),
        marginals: marginals.clone(),
    };
    Ok(SchemeRun {
        scheme,
        seed,
        trace: ConvergenceTrace::from_checkpoints(scheme.name(), seed, &[last], inst.reference)?,
        samples: state.samples(),
        rejected: state.rejected(),
        marginals,
        cache,
        unsatisfiable,
        weights,
    })
}

/// Every scheme under every seed, scheme-major in the order given. Runs are
/// spread over up to `threads` workers; the result does not depend on the
/// thread count apart from timings.
pub fn run_comparison(inst: &Instance<'_>, schemes: &[SchemeKind], seeds: &[u64], spec: &RunSpec, threads: usize) -> Result<Vec<SchemeRun>, HarnessError> {
    let jobs: Vec<(SchemeKind, u64)> = schemes.iter().flat_map(|&s| seeds.iter().map(move |&seed| (s, seed))).collect();
    let results: Vec<Mutex<Option<Result<SchemeRun, HarnessError>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    thread::scope(|s| {
        for _ in 0..threads.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(scheme, seed)) = jobs.get(i) else { break };
                let r = run_scheme(inst, scheme, seed, spec);
                *results[i].lock().expect("no poisoned slots") = Some(r);
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().expect("no poisoned slots").expect("every job ran"))
        .collect()
}
