//! Effectiveness metrics, TREC run files, and run comparison.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod metrics;
mod run;

pub use metrics::{ndcg_at, recall_at, Gain, Metric};
pub use run::{RunEntry, RunFile};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid metric {0:?}")]
    Metric(String),
    #[error("invalid run file: {0}")]
    Run(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Graded judgments keyed by qid, then docno.
pub type Judgments = BTreeMap<String, HashMap<String, u32>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Minimum grade counted as relevant for recall.
    pub rel_threshold: u32,
    pub gain: Gain,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            rel_threshold: 1,
            gain: Gain::Linear,
        }
    }
}

/// Value of one metric on one query; `None` when undefined (recall with no
/// relevant documents).
pub fn score_query(
    docnos: &[&str],
    grades: &HashMap<String, u32>,
    metric: Metric,
    opts: EvalOptions,
) -> Option<f64> {
    // borrow-keyed view so &str rankings can be looked up
    let view: HashMap<&str, u32> = grades.iter().map(|(d, &g)| (d.as_str(), g)).collect();
    match metric {
        Metric::Ndcg(k) => Some(ndcg_at(docnos, &view, k, opts.gain)),
        Metric::Recall(k) => recall_at(docnos, &view, k, opts.rel_threshold),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    /// Mean over `evaluated` queries; absent if none qualified.
    pub mean: Option<f64>,
    pub evaluated: usize,
    pub per_query: BTreeMap<String, f64>,
    /// Judged queries left out because nothing reaches the relevance
    /// threshold.
    pub no_relevant: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub options: EvalOptions,
    pub metrics: Vec<MetricSummary>,
    /// Run queries without any judgments; not evaluated.
    pub unjudged: Vec<String>,
    /// Judged queries missing from the run; not evaluated.
    pub unranked: Vec<String>,
}

impl MetricReport {
    pub fn mean(&self, metric: Metric) -> Option<f64> {
        let name = metric.to_string();
        self.metrics.iter().find(|m| m.metric == name)?.mean
    }

    pub fn per_query(&self, metric: Metric) -> Option<&BTreeMap<String, f64>> {
        let name = metric.to_string();
        self.metrics
            .iter()
            .find(|m| m.metric == name)
            .map(|m| &m.per_query)
    }

    /// Aligned columns: one row per query, then the means.
    pub fn to_text(&self) -> String {
        let mut qids: Vec<&String> = self.metrics.iter().flat_map(|m| m.per_query.keys()).collect();
        qids.sort();
        qids.dedup();
        let mut rows: Vec<Vec<String>> = vec![std::iter::once("qid".to_string())
            .chain(self.metrics.iter().map(|m| m.metric.clone()))
            .collect()];
        for q in qids {
            rows.push(
                std::iter::once(q.clone())
                    .chain(
                        self.metrics
                            .iter()
                            .map(|m| fmt_value(m.per_query.get(q).copied())),
                    )
                    .collect(),
            );
        }
        rows.push(
            std::iter::once("mean".to_string())
                .chain(self.metrics.iter().map(|m| fmt_value(m.mean)))
                .collect(),
        );
        let mut out = render(&rows);
        for m in &self.metrics {
            if !m.no_relevant.is_empty() {
                let _ = writeln!(
                    out,
                    "# {}: no relevant docs for {}",
                    m.metric,
                    m.no_relevant.join(",")
                );
            }
        }
        if !self.unjudged.is_empty() {
            let _ = writeln!(out, "# unjudged: {}", self.unjudged.join(","));
        }
        if !self.unranked.is_empty() {
            let _ = writeln!(out, "# not in run: {}", self.unranked.join(","));
        }
        out
    }
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

fn render(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(String::len)
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, cell)| {
                if i == 0 {
                    format!("{cell:<w$}", w = widths[i])
                } else {
                    format!("{cell:>w$}", w = widths[i])
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Evaluates every run query that has judgments.
pub fn evaluate(run: &RunFile, qrels: &Judgments, metrics: &[Metric], opts: EvalOptions) -> MetricReport {
    let unjudged = run
        .runs
        .keys()
        .filter(|q| !qrels.contains_key(*q))
        .cloned()
        .collect();
    let unranked = qrels
        .keys()
        .filter(|q| !run.runs.contains_key(*q))
        .cloned()
        .collect();
    let metrics = metrics
        .iter()
        .map(|&metric| {
            let mut per_query = BTreeMap::new();
            let mut no_relevant = Vec::new();
            for (qid, grades) in qrels {
                if !run.runs.contains_key(qid) {
                    continue;
                }
                match score_query(&run.docnos(qid), grades, metric, opts) {
                    Some(v) => {
                        per_query.insert(qid.clone(), v);
                    }
                    None => no_relevant.push(qid.clone()),
                }
            }
            MetricSummary {
                metric: metric.to_string(),
                mean: mean(per_query.values().copied()),
                evaluated: per_query.len(),
                per_query,
                no_relevant,
            }
        })
        .collect();
    MetricReport {
        options: opts,
        metrics,
        unjudged,
        unranked,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDelta {
    pub qid: String,
    pub a: f64,
    pub b: f64,
    /// `b - a`
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: String,
    pub rows: Vec<QueryDelta>,
    pub mean_a: Option<f64>,
    pub mean_b: Option<f64>,
    pub mean_delta: Option<f64>,
    pub only_a: Vec<String>,
    pub only_b: Vec<String>,
}

impl Comparison {
    pub fn to_text(&self) -> String {
        let mut rows = vec![vec![
            "qid".to_string(),
            "a".to_string(),
            "b".to_string(),
            "delta".to_string(),
        ]];
        for r in &self.rows {
            rows.push(vec![
                r.qid.clone(),
                fmt_value(Some(r.a)),
                fmt_value(Some(r.b)),
                format!("{:+.4}", r.delta),
            ]);
        }
        rows.push(vec![
            "mean".to_string(),
            fmt_value(self.mean_a),
            fmt_value(self.mean_b),
            self.mean_delta.map_or("-".to_string(), |d| format!("{d:+.4}")),
        ]);
        let mut out = format!("# {}\n", self.metric);
        out.push_str(&render(&rows));
        if !self.only_a.is_empty() {
            let _ = writeln!(out, "# only in a: {}", self.only_a.join(","));
        }
        if !self.only_b.is_empty() {
            let _ = writeln!(out, "# only in b: {}", self.only_b.join(","));
        }
        out
    }
}

/// Per-query `metric` deltas over queries present in both runs.
pub fn compare_runs(
    a: &RunFile,
    b: &RunFile,
    qrels: &Judgments,
    metric: Metric,
    opts: EvalOptions,
) -> Comparison {
    let ra = evaluate(a, qrels, &[metric], opts);
    let rb = evaluate(b, qrels, &[metric], opts);
    let (pa, pb) = (&ra.metrics[0].per_query, &rb.metrics[0].per_query);
    let rows: Vec<QueryDelta> = pa
        .iter()
        .filter_map(|(q, &va)| {
            pb.get(q).map(|&vb| QueryDelta {
                qid: q.clone(),
                a: va,
                b: vb,
                delta: vb - va,
            })
        })
        .collect();
    let only = |x: &RunFile, y: &RunFile| -> Vec<String> {
        x.runs
            .keys()
            .filter(|q| !y.runs.contains_key(*q))
            .cloned()
            .collect()
    };
    Comparison {
        metric: metric.to_string(),
        mean_a: mean(rows.iter().map(|r| r.a)),
        mean_b: mean(rows.iter().map(|r| r.b)),
        mean_delta: mean(rows.iter().map(|r| r.delta)),
        rows,
        only_a: only(a, b),
        only_b: only(b, a),
    }
}
