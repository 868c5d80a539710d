//! Trace CSV and summary JSON.

use std::io::{Read, Write};

use lwlc_core::cache::CacheStats;
use lwlc_core::eval::TraceRow;
use lwlc_core::exact::Marginals;
use lwlc_core::BayesNet;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::harness::SchemeRun;

pub const TRACE_HEADER: [&str; 7] = ["scheme", "seed", "t_ms", "samples", "rejected", "mse", "unresolved"];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("trace header is `{0}`, expected `scheme,seed,t_ms,samples,rejected,mse,unresolved`")]
    Header(String),
}

/// Writes the trace rows under the fixed header. An unresolved or
/// unscored row leaves `mse` empty. With `stable` every `t_ms` is written
/// as 0, which makes reruns byte-identical.
pub fn write_trace_csv<W: Write>(out: W, rows: &[TraceRow], stable: bool) -> Result<(), ReportError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in rows {
        let t_ms = if stable { 0.0 } else { r.t_ms };
        w.serialize((&r.scheme, r.seed, t_ms, r.samples, r.rejected, r.mse, r.unresolved))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRow>, ReportError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(ReportError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        let (scheme, seed, t_ms, samples, rejected, mse, unresolved): (String, u64, f64, u64, u64, Option<f64>, bool) = rec?;
        rows.push(TraceRow {
            scheme,
            seed,
            t_ms,
            samples,
            rejected,
            mse,
            unresolved,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheSummary {
    pub nodes: usize,
    pub unique_tuples: usize,
    pub hits: u64,
    pub misses: u64,
    pub hit_ratio: f64,
    pub dead_ends_marked: u64,
    /// Runs whose search tree proved `P(e) = 0`.
    pub unsatisfiable_runs: usize,
}

/// Aggregate over the runs (seeds) of one scheme. Averages cover resolved
/// runs only; `k_resolved` says how many there were.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub scheme: String,
    pub runs: usize,
    pub k_resolved: usize,
    pub mean_rejection_rate: Option<f64>,
    pub final_mse_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<CacheSummary>,
    /// Final estimate, present for single-run summaries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginals: Option<Map<String, Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seeds: Vec<u64>,
    /// Names of the cutset members, when a cutset scheme ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutset: Option<Vec<String>>,
    pub schemes: Vec<SchemeSummary>,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (n, s) = xs.into_iter().fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    (n > 0).then(|| s / n as f64)
}

/// `{variable: {label: probability}}` over the variables that carry a
/// distribution.
pub fn marginals_json(net: &BayesNet, m: &Marginals) -> Map<String, Value> {
    m.iter()
        .map(|(v, d)| {
            let var = net.variable(v);
            let dist: Map<String, Value> = var.values.iter().zip(d).map(|(l, &p)| (l.clone(), p.into())).collect();
            (var.name.clone(), Value::Object(dist))
        })
        .collect()
}

/// Groups runs by scheme in order of first appearance.
pub fn summarize(net: &BayesNet, runs: &[SchemeRun]) -> Vec<SchemeSummary> {
    let mut names: Vec<&str> = Vec::new();
    for r in runs {
        if !names.contains(&r.scheme.name()) {
            names.push(r.scheme.name());
        }
    }
    names
        .into_iter()
        .map(|name| {
            let group: Vec<&SchemeRun> = runs.iter().filter(|r| r.scheme.name() == name).collect();
            let resolved: Vec<&&SchemeRun> = group.iter().filter(|r| r.marginals.is_some()).collect();
            let cache = group.iter().filter_map(|r| r.cache.map(|c| (c, r.unsatisfiable))).fold(None, |acc: Option<CacheSummary>, (c, unsat)| {
                let mut a = acc.unwrap_or(CacheSummary {
                    nodes: 0,
                    unique_tuples: 0,
                    hits: 0,
                    misses: 0,
                    hit_ratio: 0.0,
                    dead_ends_marked: 0,
                    unsatisfiable_runs: 0,
                });
                a.nodes += c.nodes;
                a.unique_tuples += c.unique_tuples;
                a.hits += c.hits;
                a.misses += c.misses;
                a.dead_ends_marked += c.dead_ends_marked;
                a.unsatisfiable_runs += usize::from(unsat);
                a.hit_ratio = CacheStats {
                    hits: a.hits,
                    misses: a.misses,
                    ..CacheStats::default()
                }
                .hit_ratio();
                Some(a)
            });
            SchemeSummary {
                scheme: name.to_string(),
                runs: group.len(),
                k_resolved: resolved.len(),
                mean_rejection_rate: mean(resolved.iter().filter_map(|r| r.rejection_rate())),
                final_mse_mean: mean(resolved.iter().filter_map(|r| r.final_mse())),
                cache,
                marginals: match group.as_slice() {
                    [one] => one.marginals.as_ref().map(|m| marginals_json(net, m)),
                    _ => None,
                },
            }
        })
        .collect()
}

pub fn summary_json(summary: &Summary) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("plain data serializes");
    s.push('\n');
    s
}

/// `ln_weight,ln_proposal` per sample.
pub fn write_weights_csv<W: Write>(out: W, weights: &[(f64, f64)]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["ln_weight", "ln_proposal"])?;
    for &(lw, lq) in weights {
        w.serialize((lw, lq))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(mse: Option<f64>, unresolved: bool) -> TraceRow {
        TraceRow {
            scheme: "lwlc-buf".into(),
            seed: 3,
            t_ms: 12.5,
            samples: 100,
            rejected: 7,
            mse,
            unresolved,
        }
    }

    #[test]
    fn header_is_exact() {
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &[], false).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "scheme,seed,t_ms,samples,rejected,mse,unresolved\n");
    }

    #[test]
    fn rows_round_trip() {
        let rows = vec![row(Some(1.25e-5), false), row(None, true)];
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &rows, false).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().nth(2).unwrap(), "lwlc-buf,3,12.5,100,7,,true");
        assert_eq!(read_trace_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn stable_zeroes_time() {
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &[row(None, false)], true).unwrap();
        assert!(String::from_utf8(buf).unwrap().ends_with("lwlc-buf,3,0.0,100,7,,false\n"));
    }

    #[test]
    fn wrong_header_rejected() {
        let e = read_trace_csv("scheme,seed,t_ms,samples,rejected,mse\n".as_bytes()).unwrap_err();
        assert!(matches!(e, ReportError::Header(_)));
    }

    #[test]
    fn mean_of_nothing() {
        assert_eq!(mean([]), None);
        assert_eq!(mean([1.0, 2.0]), Some(1.5));
    }
}
