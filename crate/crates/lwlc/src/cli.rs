//! Command-line interface.
//!
//! Every command either succeeds and writes all of its outputs, or fails
//! with one of the [`exit`] codes and writes none of them.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lwlc_core::cache::BufferOptions;
use lwlc_core::cutset::{build_cutset_order, CutsetOrder};
use lwlc_core::exact::{bucket_elimination_query, enumerate_joint_query, iterative_bp, polytree_query, Marginals, QueryResult};
use lwlc_core::graphops::{check_prefix_polytrees, find_loop_cutset, validate_loop_cutset, Cutset};
use lwlc_core::model::{generate_evidence, generate_random_network, generate_random_polytree, GeneratorConfig};
use lwlc_core::sampling::{Budget, CheckpointEvery, SamplingError};
use lwlc_core::{BayesNet, Evidence, VarId};
use serde_json::{json, Value};
use thiserror::Error;

use crate::format::{cutset_names, parse_cutset, parse_evidence, parse_network, serialize_cutset, serialize_evidence, serialize_network, FormatError};
use crate::harness::{run_comparison, run_pooled, HarnessError, Instance, RunSpec, SchemeKind, SchemeRun};
use crate::report::{marginals_json, summarize, summary_json, write_trace_csv, write_weights_csv, Summary};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    /// Bad flags or an inconsistent configuration.
    pub const USAGE: u8 = 2;
    /// A file could not be read or written.
    pub const IO: u8 = 3;
    /// An input file is not valid JSON or has the wrong shape.
    pub const PARSE: u8 = 4;
    /// An input is well-formed but describes something invalid (a cycle, a
    /// row that does not sum to 1, an unknown name, a cutset that does not
    /// cut every loop).
    pub const SEMANTIC: u8 = 5;
    /// Inference failed (state space too large, no reference because
    /// `P(e) = 0`, no starting state for Gibbs).
    pub const INFERENCE: u8 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: FormatError },
    #[error("{0}")]
    Semantic(String),
    #[error(transparent)]
    Inference(#[from] HarnessError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io { .. } => exit::IO,
            CliError::Input { source, .. } if source.is_syntax() => exit::PARSE,
            CliError::Input { .. } | CliError::Semantic(_) => exit::SEMANTIC,
            CliError::Inference(_) => exit::INFERENCE,
        }
    }
}

impl From<SamplingError> for CliError {
    fn from(e: SamplingError) -> Self {
        CliError::Inference(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "lwlc", version, about = "Bayesian-network inference with likelihood weighting over loop-cutsets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a network (and evidence, if given)
    Validate(InputArgs),
    /// Find or check a loop-cutset
    Cutset(CutsetArgs),
    /// Exact posterior marginals
    InferExact(InferExactArgs),
    /// Loopy belief propagation
    InferIbp(InferIbpArgs),
    /// One run of one scheme
    Sample(SampleArgs),
    /// Several schemes over several seeds against the exact posterior
    Compare(CompareArgs),
    /// Generate a random network
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Network JSON file
    pub network: PathBuf,
    /// Evidence JSON file, `{"variable": "value", ...}`
    #[arg(short, long)]
    pub evidence: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CutsetArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Check this cutset (JSON array of names) instead of searching for one
    #[arg(long)]
    pub cutset: Option<PathBuf>,
    /// Write the cutset as a JSON array of names
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExactMethod {
    /// Bucket elimination with a min-fill order
    Be,
    /// Brute-force enumeration of the joint (small networks only)
    Enumerate,
    /// Belief propagation on singly-connected networks
    Polytree,
}

#[derive(Debug, Args)]
pub struct InferExactArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "be")]
    pub method: ExactMethod,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferIbpArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Number of samples (retained sweeps for gibbs and lcs)
    #[arg(long, conflicts_with = "seconds")]
    pub samples: Option<u64>,
    /// Wall-clock budget of the sampling loop
    #[arg(long)]
    pub seconds: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Checkpoint interval: a sample count (`1000`) or a duration (`250ms`, `2s`)
    #[arg(long, value_parser = parse_every)]
    pub checkpoint_every: Option<CheckpointEvery>,
    /// `auto` or a JSON file listing cutset variable names
    #[arg(long, default_value = "auto")]
    pub cutset: String,
    /// Keep lwlc-buf from zeroing exhausted branches of its search tree
    #[arg(long)]
    pub no_dead_end_learning: bool,
    /// Node cap of the lwlc-buf search tree
    #[arg(long, default_value_t = BufferOptions::default().cache_cap)]
    pub cache_cap: usize,
    /// Sweeps discarded by gibbs and lcs before sampling starts
    #[arg(long, default_value_t = 0)]
    pub burn_in: u64,
    /// Trace CSV output
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Summary JSON output (printed to stdout when absent)
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Write 0 in every t_ms column so reruns are byte-identical
    #[arg(long)]
    pub stable_output: bool,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum)]
    pub scheme: SchemeKind,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-sample `ln_weight,ln_proposal` CSV (lw, lwlc, lwlc-buf)
    #[arg(long)]
    pub dump_weights: Option<PathBuf>,
    /// Pool independent streams of lw or lwlc over this many threads
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: u32,
    /// Skip the exact reference (the mse column stays empty)
    #[arg(long)]
    pub no_mse: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Comma-separated schemes
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    pub schemes: Vec<SchemeKind>,
    #[command(flatten)]
    pub run: RunArgs,
    /// Number of seeds per scheme
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed_start: u64,
    /// Worker threads (defaults to the available parallelism)
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Number of variables
    #[arg(short, long)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub max_parents: usize,
    #[arg(long, default_value_t = 2)]
    pub max_card: usize,
    /// Probability that a CPT row becomes a point mass
    #[arg(long, default_value_t = 0.0)]
    pub determinism: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Generate a singly-connected network
    #[arg(long)]
    pub polytree: bool,
    /// Network output (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Observe this many variables (leaves first) valued by a forward sample
    #[arg(long, requires = "evidence_out")]
    pub observe: Option<usize>,
    #[arg(long, requires = "observe")]
    pub evidence_out: Option<PathBuf>,
}

fn parse_every(s: &str) -> Result<CheckpointEvery, String> {
    let s = s.trim();
    let millis = if let Some(v) = s.strip_suffix("ms") {
        Some(v.trim().parse::<f64>().map_err(|e| e.to_string())?)
    } else if let Some(v) = s.strip_suffix('s') {
        Some(v.trim().parse::<f64>().map_err(|e| e.to_string())? * 1e3)
    } else {
        None
    };
    match millis {
        Some(ms) if ms.is_finite() && ms > 0.0 => Ok(CheckpointEvery::Millis(ms)),
        Some(_) => Err("interval must be positive".into()),
        None => match s.parse::<u64>() {
            Ok(0) => Err("interval must be positive".into()),
            Ok(n) => Ok(CheckpointEvery::Samples(n)),
            Err(_) => Err(format!("`{s}` is neither a sample count nor a duration like 250ms or 2s")),
        },
    }
}

/// Output files are staged and only written once the command has
/// succeeded; each lands through a rename of a sibling temporary file.
#[derive(Default)]
struct Outputs(Vec<(PathBuf, Vec<u8>)>);

impl Outputs {
    fn add(&mut self, path: &Path, bytes: Vec<u8>) {
        self.0.push((path.to_path_buf(), bytes));
    }

    fn commit(self) -> Result<(), CliError> {
        let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
        let cleanup = |staged: &[(PathBuf, PathBuf)]| {
            for (tmp, _) in staged {
                let _ = fs::remove_file(tmp);
            }
        };
        for (path, bytes) in self.0 {
            let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
            name.push(format!(".partial-{}", std::process::id()));
            let tmp = path.with_file_name(format!(".{}", name.to_string_lossy()));
            if let Err(source) = fs::write(&tmp, bytes) {
                let _ = fs::remove_file(&tmp);
                cleanup(&staged);
                return Err(CliError::Io { path, source });
            }
            staged.push((tmp, path));
        }
        for (i, (tmp, path)) in staged.iter().enumerate() {
            if let Err(source) = fs::rename(tmp, path) {
                cleanup(&staged[i..]);
                return Err(CliError::Io { path: path.clone(), source });
            }
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn input_err(path: &Path) -> impl FnOnce(FormatError) -> CliError + '_ {
    move |source| CliError::Input {
        path: path.to_path_buf(),
        source,
    }
}

fn load(input: &InputArgs) -> Result<(BayesNet, Evidence), CliError> {
    let net = parse_network(&read(&input.network)?).map_err(input_err(&input.network))?;
    let ev = match &input.evidence {
        Some(p) => parse_evidence(&read(p)?, &net).map_err(input_err(p))?,
        None => Evidence::new(),
    };
    Ok((net, ev))
}

fn print(text: &str) {
    // a closed pipe is not worth failing over once the outputs are written
    let _ = io::stdout().lock().write_all(text.as_bytes());
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate(a) => validate(a),
        Command::Cutset(a) => cutset(a),
        Command::InferExact(a) => infer_exact(a),
        Command::InferIbp(a) => infer_ibp(a),
        Command::Sample(a) => sample(a),
        Command::Compare(a) => compare(a),
        Command::Gen(a) => gen(a),
    }
}

fn validate(a: InputArgs) -> Result<(), CliError> {
    let (net, ev) = load(&a)?;
    let entries: usize = net.cpts().iter().map(|c| c.table().len()).sum();
    eprintln!(
        "valid: {} variables, {} edges, {} CPT entries, {} observed",
        net.len(),
        net.num_edges(),
        entries,
        ev.len()
    );
    Ok(())
}

fn z_in_order(net: &BayesNet, cutset: &Cutset, ev: &Evidence) -> Vec<VarId> {
    net.topological_order().iter().copied().filter(|&v| cutset.contains(v) || ev.contains(v)).collect()
}

fn cutset(a: CutsetArgs) -> Result<(), CliError> {
    let (net, ev) = load(&a.input)?;
    let c = match &a.cutset {
        Some(p) => parse_cutset(&read(p)?, &net).map_err(input_err(p))?,
        None => find_loop_cutset(&net, &ev.vars().collect::<Vec<_>>()),
    };
    let z = z_in_order(&net, &c, &ev);
    let disjoint = !c.members().iter().any(|&v| ev.contains(v));
    let cuts = validate_loop_cutset(&net, &z);
    let prefixes = cuts && check_prefix_polytrees(&net, &z);
    let verdict = |ok: bool| if ok { "valid" } else { "invalid" };
    let names = cutset_names(&c, &net);
    let mut report = format!(
        "members: {}\nsize: {}\nloop-cutset with evidence: {}\nprefix poly-trees: {}\n",
        if names.is_empty() { "(none)".to_string() } else { names.join(", ") },
        c.len(),
        verdict(cuts),
        verdict(prefixes),
    );
    if !disjoint {
        report.push_str("disjoint from evidence: no\n");
    }
    print(&report);
    if !(disjoint && cuts && prefixes) {
        return Err(CliError::Semantic("cutset is invalid".into()));
    }
    let mut out = Outputs::default();
    if let Some(p) = &a.out {
        out.add(p, serialize_cutset(&c, &net).into_bytes());
    }
    out.commit()
}

fn query_json(net: &BayesNet, method: &str, q: &QueryResult) -> Value {
    json!({
        "method": method,
        "evidence_probability": q.evidence_probability,
        "log_evidence_probability": q.log_evidence_probability,
        "marginals": q.marginals.as_ref().map(|m| marginals_json(net, m)),
    })
}

fn emit(out_path: Option<&Path>, text: String) -> Result<(), CliError> {
    match out_path {
        Some(p) => {
            let mut out = Outputs::default();
            out.add(p, text.into_bytes());
            out.commit()
        }
        None => {
            print(&text);
            Ok(())
        }
    }
}

fn infer_exact(a: InferExactArgs) -> Result<(), CliError> {
    let (net, ev) = load(&a.input)?;
    let (name, q) = match a.method {
        ExactMethod::Be => ("be", bucket_elimination_query(&net, &ev)),
        ExactMethod::Enumerate => ("enumerate", enumerate_joint_query(&net, &ev)),
        ExactMethod::Polytree => ("polytree", polytree_query(&net, None, &ev)),
    };
    let q = q.map_err(HarnessError::from)?;
    emit(a.out.as_deref(), pretty(&query_json(&net, name, &q)))
}

fn infer_ibp(a: InferIbpArgs) -> Result<(), CliError> {
    let (net, ev) = load(&a.input)?;
    let r = iterative_bp(&net, &ev, a.max_iters, a.tol).map_err(HarnessError::from)?;
    let v = json!({
        "converged": r.converged,
        "iterations": r.iterations,
        "approx_log_evidence_probability": r.approx_log_evidence_probability,
        "marginals": r.marginals.as_ref().map(|m| marginals_json(&net, m)),
    });
    emit(a.out.as_deref(), pretty(&v))
}

fn budget(b: &BudgetArgs, schemes: &[SchemeKind]) -> Result<Budget, CliError> {
    match (b.samples, b.seconds) {
        (Some(n), _) => Ok(Budget::Samples(n)),
        (None, Some(s)) if s.is_finite() && s > 0.0 => Ok(Budget::Millis(s * 1e3)),
        (None, Some(s)) => Err(CliError::Usage(format!("--seconds must be positive, got {s}"))),
        (None, None) => match schemes.iter().find(|s| s.is_sampler()) {
            Some(s) => Err(CliError::Usage(format!("scheme `{}` needs --samples or --seconds", s.name()))),
            None => Ok(Budget::Samples(0)),
        },
    }
}

fn cutset_order(r: &RunArgs, net: &BayesNet, ev: &Evidence, schemes: &[SchemeKind]) -> Result<Option<CutsetOrder>, CliError> {
    if !schemes.iter().any(|s| s.uses_cutset()) {
        return Ok(None);
    }
    let c = if r.cutset == "auto" {
        find_loop_cutset(net, &ev.vars().collect::<Vec<_>>())
    } else {
        let p = Path::new(&r.cutset);
        parse_cutset(&read(p)?, net).map_err(input_err(p))?
    };
    match build_cutset_order(net, ev, &c) {
        Ok(o) => Ok(Some(o)),
        Err(e @ (SamplingError::InvalidCutset | SamplingError::CutsetOverlapsEvidence(_))) => {
            let e = match e {
                SamplingError::CutsetOverlapsEvidence(v) => format!("cutset member `{}` is observed", net.variable(v).name),
                other => other.to_string(),
            };
            Err(CliError::Semantic(e))
        }
        Err(e) => Err(e.into()),
    }
}

fn reference(net: &BayesNet, ev: &Evidence) -> Result<Marginals, CliError> {
    let q = bucket_elimination_query(net, ev).map_err(HarnessError::from)?;
    Ok(q.marginals.ok_or(HarnessError::NoReference)?)
}

fn spec(r: &RunArgs, budget: Budget) -> RunSpec {
    let mut s = RunSpec::new(budget);
    s.every = r.checkpoint_every.unwrap_or(CheckpointEvery::Never);
    s.burn_in = r.burn_in;
    s.buffer = BufferOptions {
        learn_dead_ends: !r.no_dead_end_learning,
        cache_cap: r.cache_cap,
    };
    s
}

fn stage_reports(out: &mut Outputs, r: &RunArgs, net: &BayesNet, order: Option<&CutsetOrder>, seeds: Vec<u64>, runs: &[SchemeRun]) -> Result<(), CliError> {
    if let Some(p) = &r.trace {
        let rows: Vec<_> = runs.iter().flat_map(|r| r.trace.rows.iter().cloned()).collect();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &rows, r.stable_output).map_err(|e| CliError::Io {
            path: p.clone(),
            source: io::Error::other(e),
        })?;
        out.add(p, buf);
    }
    let summary = Summary {
        seeds,
        cutset: order.map(|o| cutset_names(o.cutset(), net)),
        schemes: summarize(net, runs),
    };
    let text = summary_json(&summary);
    match &r.summary {
        Some(p) => out.add(p, text.into_bytes()),
        None => out.add(Path::new("-"), text.into_bytes()),
    }
    Ok(())
}

/// Commits files, then prints whatever was addressed to `-`.
fn finish(out: Outputs) -> Result<(), CliError> {
    let (stdout, files): (Vec<_>, Vec<_>) = out.0.into_iter().partition(|(p, _)| p.as_os_str() == "-");
    Outputs(files).commit()?;
    for (_, bytes) in stdout {
        print(&String::from_utf8_lossy(&bytes));
    }
    Ok(())
}

fn sample(a: SampleArgs) -> Result<(), CliError> {
    let (net, ev) = load(&a.input)?;
    let schemes = [a.scheme];
    let threads = a.threads as usize;
    if a.dump_weights.is_some() && !a.scheme.is_weighted() {
        return Err(CliError::Usage(format!("--dump-weights applies to lw, lwlc and lwlc-buf, not `{}`", a.scheme.name())));
    }
    if threads > 1 && !matches!(a.scheme, SchemeKind::Lw | SchemeKind::Lwlc) {
        return Err(CliError::Usage(format!("--threads above 1 applies to lw and lwlc, not `{}`", a.scheme.name())));
    }
    if threads > 1 && a.run.checkpoint_every.is_some() {
        return Err(CliError::Usage("--checkpoint-every needs --threads 1".into()));
    }
    let budget = budget(&a.run.budget, &schemes)?;
    let order = cutset_order(&a.run, &net, &ev, &schemes)?;
    let exact = if a.no_mse { None } else { Some(reference(&net, &ev)?) };
    let inst = Instance {
        net: &net,
        evidence: &ev,
        order: order.as_ref(),
        reference: exact.as_ref(),
    };
    let mut spec = spec(&a.run, budget);
    spec.record_weights = a.dump_weights.is_some();
    let run = run_pooled(&inst, a.scheme, a.seed, &spec, threads)?;
    let mut out = Outputs::default();
    if let Some(p) = &a.dump_weights {
        let mut buf = Vec::new();
        write_weights_csv(&mut buf, &run.weights).map_err(|e| CliError::Io {
            path: p.clone(),
            source: io::Error::other(e),
        })?;
        out.add(p, buf);
    }
    stage_reports(&mut out, &a.run, &net, order.as_ref(), vec![a.seed], std::slice::from_ref(&run))?;
    finish(out)
}

fn compare(a: CompareArgs) -> Result<(), CliError> {
    let (net, ev) = load(&a.input)?;
    let budget = budget(&a.run.budget, &a.schemes)?;
    let order = cutset_order(&a.run, &net, &ev, &a.schemes)?;
    let exact = reference(&net, &ev)?;
    let inst = Instance {
        net: &net,
        evidence: &ev,
        order: order.as_ref(),
        reference: Some(&exact),
    };
    let seeds: Vec<u64> = (a.seed_start..a.seed_start + a.seeds).collect();
    let threads = a
        .threads
        .map(|t| t as usize)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let runs = run_comparison(&inst, &a.schemes, &seeds, &spec(&a.run, budget), threads)?;
    let mut out = Outputs::default();
    stage_reports(&mut out, &a.run, &net, order.as_ref(), seeds, &runs)?;
    finish(out)
}

fn gen(a: GenArgs) -> Result<(), CliError> {
    if a.n == 0 {
        return Err(CliError::Usage("-n must be at least 1".into()));
    }
    if a.max_parents >= a.n {
        return Err(CliError::Usage(format!("--max-parents must be below -n ({})", a.n)));
    }
    if !(0.0..=1.0).contains(&a.determinism) {
        return Err(CliError::Usage("--determinism must lie in [0, 1]".into()));
    }
    let cfg = GeneratorConfig::new(a.n, a.max_parents, a.max_card, a.determinism, a.seed);
    let net = if a.polytree {
        generate_random_polytree(&cfg)
    } else {
        generate_random_network(&cfg)
    };
    let mut out = Outputs::default();
    out.add(a.out.as_deref().unwrap_or(Path::new("-")), serialize_network(&net).into_bytes());
    if let (Some(k), Some(p)) = (a.observe, &a.evidence_out) {
        out.add(p, serialize_evidence(&generate_evidence(&net, k, a.seed), &net).into_bytes());
    }
    finish(out)
}
