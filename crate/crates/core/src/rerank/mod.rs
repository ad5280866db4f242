//! Sliding-window listwise reranking with adaptive retrieval.
//!
//! [`slidegar`] walks the initial ranking left to right. After every ranker
//! call the top `b` documents are carried into the next window, the rest are
//! emitted, and the next `b` slots are filled alternately from the remaining
//! initial ranking and from the corpus-graph neighbors of the batch just
//! ranked. Because each call emits as many documents as the standard sliding
//! window would, both strategies use `ceil((c - w) / b) + 1` ranker calls for
//! a budget of `c` documents.
//!
//! [`slidegar_rm3`] fills the feedback slots by RM3-expanding the query with
//! the carried documents instead of consulting a graph, and
//! [`sliding_window_baseline`] is the usual back-to-front sliding window over
//! the top `c` initial results.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusStore, DocId, Query};
use crate::graph::{neighbours, CorpusGraph};
use crate::lexical::{retrieve_expanded, rm3_expand, InvertedIndex, Rm3Params};
use crate::rankers::{checked_rank, CallCounter, ListwiseRanker, RankError, Window};
use crate::ranking::{Ranking, Scored};

#[derive(Debug, thiserror::Error)]
pub enum RerankError {
    #[error("invalid rerank configuration: {0}")]
    Config(String),
    #[error("initial ranking is empty")]
    EmptyInitial,
    #[error("{0} is not a document of the store")]
    UnknownDoc(DocId),
    #[error("graph has {graph} nodes but the store has {store} documents")]
    GraphMismatch { graph: usize, store: usize },
    #[error(transparent)]
    Rank(#[from] RankError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RerankConfig {
    /// Documents per ranker call (`w`).
    #[serde(rename = "w")]
    pub window: usize,
    /// Documents carried between calls and drawn per refill (`b`).
    #[serde(rename = "b")]
    pub step: usize,
    /// Reranking budget (`c`).
    #[serde(rename = "c")]
    pub budget: usize,
    /// Graph depth used for neighbor lookup.
    pub truncate_k: usize,
    /// Keep unconsumed frontier candidates across iterations instead of
    /// rebuilding the frontier from the latest batch only.
    pub accumulate_frontier: bool,
}

impl Default for RerankConfig {
    fn default() -> Self {
        Self {
            window: 20,
            step: 10,
            budget: 50,
            truncate_k: 16,
            accumulate_frontier: false,
        }
    }
}

impl RerankConfig {
    pub fn new(window: usize, step: usize, budget: usize) -> Self {
        Self {
            window,
            step,
            budget,
            ..Default::default()
        }
    }

    pub fn with_truncate_k(mut self, k: usize) -> Self {
        self.truncate_k = k;
        self
    }

    pub fn validate(&self) -> Result<(), RerankError> {
        if self.step == 0 || self.step >= self.window || self.window > self.budget {
            return Err(RerankError::Config(format!(
                "need 1 <= b < w <= c, got w={} b={} c={}",
                self.window, self.step, self.budget
            )));
        }
        Ok(())
    }

    /// `ceil((c - w) / b) + 1`.
    pub fn expected_calls(&self) -> u64 {
        ((self.budget - self.window).div_ceil(self.step) + 1) as u64
    }
}

/// Reciprocal-rank pseudo-scores for a score-free ordering.
pub fn pseudo_scores(batch: &[DocId]) -> Vec<Scored> {
    batch
        .iter()
        .enumerate()
        .map(|(i, &d)| Scored::new(d, 1.0 / (i + 1) as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Pool {
    Initial,
    Frontier,
}

impl Pool {
    fn other(self) -> Self {
        match self {
            Pool::Initial => Pool::Frontier,
            Pool::Frontier => Pool::Initial,
        }
    }
}

/// One ranker call as seen by the pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowTrace {
    pub iteration: usize,
    pub window: Vec<DocId>,
    pub ranked: Vec<DocId>,
    pub carried: Vec<DocId>,
    /// Pool the next window's fresh documents came from, if there was one.
    pub refill: Option<Pool>,
}

#[derive(Debug, Clone)]
pub struct RerankOutcome {
    pub ranking: Ranking,
    pub counter: CallCounter,
    /// Wall time outside the ranker.
    pub bookkeeping: Duration,
    pub trace: Vec<WindowTrace>,
}

impl RerankOutcome {
    /// Output documents that were not part of the initial ranking.
    pub fn escaped(&self, initial: &[DocId]) -> usize {
        let r0: HashSet<DocId> = initial.iter().copied().collect();
        self.ranking.iter().filter(|s| !r0.contains(&s.doc)).count()
    }
}

/// Remaining initial ranking, consumed through a cursor that skips anything
/// already ranked.
struct InitialPool<'a> {
    docs: &'a [DocId],
    cursor: usize,
}

impl InitialPool<'_> {
    fn take(&mut self, n: usize, ranked: &HashSet<DocId>, out: &mut Vec<DocId>) {
        while out.len() < n && self.cursor < self.docs.len() {
            let d = self.docs[self.cursor];
            self.cursor += 1;
            if !ranked.contains(&d) && !out.contains(&d) {
                out.push(d);
            }
        }
    }

    fn is_exhausted(&mut self, ranked: &HashSet<DocId>) -> bool {
        while self.cursor < self.docs.len() && ranked.contains(&self.docs[self.cursor]) {
            self.cursor += 1;
        }
        self.cursor >= self.docs.len()
    }
}

enum Feedback<'a> {
    Graph(&'a CorpusGraph),
    Rm3 {
        index: &'a InvertedIndex,
        params: &'a Rm3Params,
    },
}

fn check_ids(initial: &[DocId], store: &CorpusStore) -> Result<(), RerankError> {
    if initial.is_empty() {
        return Err(RerankError::EmptyInitial);
    }
    match initial.iter().find(|d| d.index() >= store.len()) {
        Some(&d) => Err(RerankError::UnknownDoc(d)),
        None => Ok(()),
    }
}

/// Graph-based adaptive sliding-window reranking.
pub fn slidegar(
    query: &Query,
    initial: &[DocId],
    ranker: &dyn ListwiseRanker,
    store: &CorpusStore,
    graph: &CorpusGraph,
    cfg: &RerankConfig,
) -> Result<RerankOutcome, RerankError> {
    if graph.len() != store.len() {
        return Err(RerankError::GraphMismatch {
            graph: graph.len(),
            store: store.len(),
        });
    }
    if cfg.truncate_k > graph.k() {
        return Err(RerankError::Config(format!(
            "truncate_k = {} exceeds graph degree {}",
            cfg.truncate_k,
            graph.k()
        )));
    }
    adaptive_loop(query, initial, ranker, store, cfg, Feedback::Graph(graph))
}

/// Adaptive sliding window whose feedback slots come from RM3 expansion of
/// the query with the carried documents. The ranker always sees the original
/// query.
pub fn slidegar_rm3(
    query: &Query,
    initial: &[DocId],
    ranker: &dyn ListwiseRanker,
    store: &CorpusStore,
    index: &InvertedIndex,
    cfg: &RerankConfig,
    params: &Rm3Params,
) -> Result<RerankOutcome, RerankError> {
    params
        .validate()
        .map_err(|e| RerankError::Config(e.to_string()))?;
    adaptive_loop(
        query,
        initial,
        ranker,
        store,
        cfg,
        Feedback::Rm3 { index, params },
    )
}

fn adaptive_loop(
    query: &Query,
    initial: &[DocId],
    ranker: &dyn ListwiseRanker,
    store: &CorpusStore,
    cfg: &RerankConfig,
    feedback: Feedback<'_>,
) -> Result<RerankOutcome, RerankError> {
    let start = Instant::now();
    cfg.validate()?;
    check_ids(initial, store)?;
    let (w, b, c) = (cfg.window, cfg.step, cfg.budget);

    let mut counter = CallCounter::default();
    let mut trace = Vec::new();
    let mut ranked: HashSet<DocId> = HashSet::new();
    let mut pool0 = InitialPool {
        docs: initial,
        cursor: 0,
    };
    // (doc, iteration, rank within window)
    let mut emitted: Vec<(DocId, usize, usize)> = Vec::new();
    let mut carried: Vec<DocId>;
    let mut frontier: Vec<DocId> = Vec::new();
    let mut selector = Pool::Initial;

    let mut window = Vec::with_capacity(w);
    pool0.take(w, &ranked, &mut window);
    let mut iteration = 0;
    loop {
        iteration += 1;
        let batch = checked_rank(ranker, &Window::from_ids(query, store, &window), &mut counter)?;
        ranked.extend(batch.iter().copied());

        let keep = b.min(batch.len());
        carried = batch[..keep].to_vec();
        emitted.extend(
            batch[keep..]
                .iter()
                .enumerate()
                .map(|(i, &d)| (d, iteration, keep + i + 1)),
        );

        let mut step_trace = WindowTrace {
            iteration,
            window: std::mem::take(&mut window),
            ranked: batch.clone(),
            carried: carried.clone(),
            refill: None,
        };

        let mut fresh = Vec::with_capacity(b);
        match &feedback {
            Feedback::Graph(graph) => {
                let candidates = neighbours(graph, &pseudo_scores(&batch), cfg.truncate_k);
                let mut next: Vec<DocId> = candidates.into_iter().filter(|d| !ranked.contains(d)).collect();
                if cfg.accumulate_frontier {
                    let have: HashSet<DocId> = next.iter().copied().collect();
                    next.extend(
                        frontier
                            .iter()
                            .filter(|d| !ranked.contains(d) && !have.contains(d)),
                    );
                }
                frontier = next;

                if emitted.len() >= c - b {
                    trace.push(step_trace);
                    break;
                }
                selector = selector.other();
                let pool = match selector {
                    Pool::Frontier if frontier.is_empty() => Pool::Initial,
                    Pool::Initial if pool0.is_exhausted(&ranked) => Pool::Frontier,
                    s => s,
                };
                match pool {
                    Pool::Initial => pool0.take(b, &ranked, &mut fresh),
                    Pool::Frontier => fresh.extend(frontier.iter().take(b).copied()),
                }
                step_trace.refill = (!fresh.is_empty()).then_some(pool);
            }
            Feedback::Rm3 { index, params } => {
                if emitted.len() >= c - b {
                    trace.push(step_trace);
                    break;
                }
                if let Ok(eq) = rm3_expand(index, &query.text, &pseudo_scores(&carried), params) {
                    if let Ok(r) = retrieve_expanded(index, &eq, b, &ranked) {
                        fresh.extend(r.ids());
                    }
                }
                let pool = if fresh.is_empty() {
                    pool0.take(b, &ranked, &mut fresh);
                    Pool::Initial
                } else {
                    Pool::Frontier
                };
                step_trace.refill = (!fresh.is_empty()).then_some(pool);
            }
        }
        trace.push(step_trace);

        if fresh.is_empty() {
            break;
        }
        window = carried.iter().copied().chain(fresh).collect();
    }

    emitted.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    let order = carried
        .into_iter()
        .chain(emitted.into_iter().map(|e| e.0))
        .take(c);
    let ranking = Ranking::from_order(order);

    let bookkeeping = start.elapsed().saturating_sub(counter.wall_time);
    Ok(RerankOutcome {
        ranking,
        counter,
        bookkeeping,
        trace,
    })
}

/// Standard sliding window: windows of `w` move from the tail of the top-`c`
/// list toward its head with stride `b`, each result overwriting its slots.
pub fn sliding_window_baseline(
    query: &Query,
    initial: &[DocId],
    ranker: &dyn ListwiseRanker,
    store: &CorpusStore,
    cfg: &RerankConfig,
) -> Result<RerankOutcome, RerankError> {
    let start = Instant::now();
    cfg.validate()?;
    check_ids(initial, store)?;
    let mut seen = HashSet::new();
    let mut list: Vec<DocId> = initial
        .iter()
        .copied()
        .filter(|d| seen.insert(*d))
        .take(cfg.budget)
        .collect();

    let mut counter = CallCounter::default();
    let mut trace = Vec::new();
    let mut end = list.len();
    let mut iteration = 0;
    loop {
        iteration += 1;
        let lo = end.saturating_sub(cfg.window);
        let window = list[lo..end].to_vec();
        let ranked = checked_rank(ranker, &Window::from_ids(query, store, &window), &mut counter)?;
        list[lo..end].copy_from_slice(&ranked);
        trace.push(WindowTrace {
            iteration,
            window,
            ranked,
            carried: Vec::new(),
            refill: None,
        });
        if lo == 0 {
            break;
        }
        end -= cfg.step;
    }

    let bookkeeping = start.elapsed().saturating_sub(counter.wall_time);
    Ok(RerankOutcome {
        ranking: Ranking::from_order(list),
        counter,
        bookkeeping,
        trace,
    })
}
