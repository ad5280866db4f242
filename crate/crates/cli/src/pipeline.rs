//! Artifact loading and the per-query retrieve-then-rerank loop.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use slidegar::corpus::{ingest_corpus, map_qrels, read_qrels, read_queries, CorpusStore, QrelTable, Query};
use slidegar::dense::{dense_retrieve, EmbeddingFile, EmbeddingTable};
use slidegar::eval::{Judgments, RunEntry, RunFile};
use slidegar::graph::CorpusGraph;
use slidegar::lexical::InvertedIndex;
use slidegar::rankers::{IdentityRanker, ListwiseRanker, NoisyOracleRanker, OracleRanker, RemoteRanker};
use slidegar::rerank::{slidegar, slidegar_rm3, sliding_window_baseline, RerankConfig, RerankError};
use slidegar::DocId;

use crate::config::{PipelineConfig, RankerKind, Retriever, StrategyKind};

pub fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    ))
}

pub fn load_store(corpus: &Path, dedup: bool) -> Result<CorpusStore> {
    let (store, report) =
        ingest_corpus(open(corpus)?, dedup).with_context(|| format!("corpus {}", corpus.display()))?;
    if !report.is_empty() {
        log::info!("dedup dropped {} documents", report.len());
    }
    Ok(store)
}

pub fn load_index(dir: Option<&Path>, store: &CorpusStore) -> Result<InvertedIndex> {
    match dir {
        Some(d) => InvertedIndex::read_dir(d, store).with_context(|| format!("index {}", d.display())),
        None => Ok(InvertedIndex::build(store)),
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingFile> {
    EmbeddingFile::read(open(path)?).with_context(|| format!("embeddings {}", path.display()))
}

/// Everything a run needs, loaded once.
pub struct Pipeline {
    pub cfg: PipelineConfig,
    pub store: CorpusStore,
    pub queries: Vec<Query>,
    pub qrels: Option<Arc<QrelTable>>,
    index: Option<InvertedIndex>,
    graph: Option<CorpusGraph>,
    dense: Option<(EmbeddingTable, HashMap<String, Vec<f32>>)>,
    ranker: Box<dyn ListwiseRanker>,
    remote: Option<Arc<RemoteRanker>>,
}

/// Shares one remote client between the pipeline and its degradation count.
struct SharedRemote(Arc<RemoteRanker>);

impl ListwiseRanker for SharedRemote {
    fn rank(
        &self,
        w: &slidegar::rankers::Window<'_>,
    ) -> Result<slidegar::rankers::Batch, slidegar::rankers::RankError> {
        self.0.rank(w)
    }

    fn name(&self) -> &str {
        self.0.name()
    }
}

/// One query's run entries and telemetry; `None` when it was skipped.
type QueryResult = Result<Option<(Vec<RunEntry>, QueryTelemetry)>>;

#[derive(Debug, Clone, Serialize)]
pub struct QueryTelemetry {
    pub qid: String,
    pub initial_depth: usize,
    pub llm_calls: u64,
    pub bookkeeping_ms: f64,
    pub ranker_ms: f64,
    pub escaped_docs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Telemetry {
    pub config: PipelineConfig,
    pub queries: usize,
    pub llm_calls: u64,
    pub bookkeeping_ms: f64,
    pub ranker_ms: f64,
    pub escaped_docs: usize,
    /// Windows answered with their input order by a misbehaving endpoint.
    pub degradations: u64,
    /// Queries with an empty first-stage ranking, left out of the run.
    pub skipped: Vec<String>,
    pub per_query: Vec<QueryTelemetry>,
}

impl Pipeline {
    pub fn load(cfg: PipelineConfig) -> Result<Self> {
        let store = load_store(&cfg.corpus, cfg.dedup)?;
        let queries = read_queries(open(&cfg.queries)?)
            .with_context(|| format!("queries {}", cfg.queries.display()))?;
        let qrels = match &cfg.qrels {
            Some(p) => {
                let entries = read_qrels(open(p)?).with_context(|| format!("qrels {}", p.display()))?;
                let (table, absent) = map_qrels(&entries, &store);
                if !absent.is_empty() {
                    log::warn!("{} judgments name documents outside the corpus", absent.len());
                }
                Some(Arc::new(table))
            }
            None => None,
        };
        let needs_index = cfg.retriever == Retriever::Bm25 || cfg.strategy == StrategyKind::SlidegarRm3;
        let index = if needs_index {
            Some(load_index(cfg.index.as_deref(), &store)?)
        } else {
            None
        };
        let graph = match (&cfg.graph, cfg.strategy) {
            (Some(p), StrategyKind::Slidegar) => {
                Some(CorpusGraph::read(p, Some(&store)).with_context(|| format!("graph {}", p.display()))?)
            }
            _ => None,
        };
        let dense = match (cfg.retriever, &cfg.embeddings, &cfg.query_embeddings) {
            (Retriever::Dense, Some(d), Some(q)) => {
                let table = EmbeddingTable::from_file(load_embeddings(d)?, &store, false)
                    .with_context(|| format!("embeddings {}", d.display()))?;
                let qv = load_embeddings(q)?;
                if qv.header.dim != table.dim() {
                    bail!(
                        "query embeddings have dim {}, documents {}",
                        qv.header.dim,
                        table.dim()
                    );
                }
                Some((table, qv.into_map()))
            }
            _ => None,
        };
        let mut remote = None;
        let ranker: Box<dyn ListwiseRanker> = match cfg.ranker {
            RankerKind::Identity => Box::new(IdentityRanker),
            RankerKind::Oracle => Box::new(OracleRanker::new(
                qrels.clone().context("oracle ranker needs qrels")?,
            )),
            RankerKind::NoisyOracle => Box::new(NoisyOracleRanker::new(
                qrels.clone().context("noisy oracle needs qrels")?,
                cfg.noise,
                cfg.seed,
            )?),
            RankerKind::Remote => {
                let r = Arc::new(RemoteRanker::new(cfg.remote.clone())?);
                remote = Some(Arc::clone(&r));
                Box::new(SharedRemote(r))
            }
        };
        Ok(Self {
            cfg,
            store,
            queries,
            qrels,
            index,
            graph,
            dense,
            ranker,
            remote,
        })
    }

    pub fn judgments(&self) -> Option<Judgments> {
        self.qrels.as_ref().map(|q| q.by_docno(&self.store))
    }

    fn initial(&self, q: &Query) -> Result<Vec<DocId>> {
        let c = self.cfg.c;
        Ok(match self.cfg.retriever {
            Retriever::Bm25 => self
                .index
                .as_ref()
                .expect("index loaded")
                .bm25_retrieve(&q.text, c)?
                .ids(),
            Retriever::Dense => {
                let (table, qv) = self.dense.as_ref().expect("embeddings loaded");
                let v = qv
                    .get(&q.qid)
                    .with_context(|| format!("no embedding for query {}", q.qid))?;
                dense_retrieve(table, v, c)?.ids()
            }
        })
    }

    /// Reranks every query with `rerank`, on `jobs` threads (0 = all cores).
    /// The run is keyed by qid, so completion order does not matter.
    pub fn run_with(&self, rerank: &RerankConfig, jobs: usize) -> Result<(RunFile, Telemetry)> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
        let results: Vec<QueryResult> =
            pool.install(|| self.queries.par_iter().map(|q| self.one(q, rerank)).collect());

        let mut run = RunFile::new(self.cfg.tag.clone());
        let mut per_query = Vec::new();
        let mut skipped = Vec::new();
        for (q, r) in self.queries.iter().zip(results) {
            match r.with_context(|| format!("query {}", q.qid))? {
                Some((entries, t)) => {
                    run.insert(&q.qid, entries)?;
                    per_query.push(t);
                }
                None => skipped.push(q.qid.clone()),
            }
        }
        per_query.sort_by(|a, b| a.qid.cmp(&b.qid));
        let mut cfg = self.cfg.clone();
        cfg.truncate_k = rerank.truncate_k;
        let telemetry = Telemetry {
            config: cfg,
            queries: per_query.len(),
            llm_calls: per_query.iter().map(|t| t.llm_calls).sum(),
            bookkeeping_ms: per_query.iter().map(|t| t.bookkeeping_ms).sum(),
            ranker_ms: per_query.iter().map(|t| t.ranker_ms).sum(),
            escaped_docs: per_query.iter().map(|t| t.escaped_docs).sum(),
            degradations: self.remote.as_ref().map_or(0, |r| r.degradations()),
            skipped,
            per_query,
        };
        Ok((run, telemetry))
    }

    fn one(&self, q: &Query, rerank: &RerankConfig) -> QueryResult {
        let r0 = self.initial(q)?;
        let ranker = self.ranker.as_ref();
        let out = match self.cfg.strategy {
            StrategyKind::Baseline => sliding_window_baseline(q, &r0, ranker, &self.store, rerank),
            StrategyKind::Slidegar => {
                let g = self.graph.as_ref().context("strategy slidegar needs a graph")?;
                slidegar(q, &r0, ranker, &self.store, g, rerank)
            }
            StrategyKind::SlidegarRm3 => {
                let idx = self.index.as_ref().expect("index loaded");
                slidegar_rm3(q, &r0, ranker, &self.store, idx, rerank, &self.cfg.rm3)
            }
        };
        let out = match out {
            Err(RerankError::EmptyInitial) => {
                log::warn!("query {}: empty first-stage ranking, skipped", q.qid);
                return Ok(None);
            }
            r => r?,
        };
        let entries = out
            .ranking
            .iter()
            .map(|s| RunEntry {
                docno: self.store.docno(s.doc).to_string(),
                score: s.score,
            })
            .collect();
        let t = QueryTelemetry {
            qid: q.qid.clone(),
            initial_depth: r0.len(),
            llm_calls: out.counter.calls,
            bookkeeping_ms: out.bookkeeping.as_secs_f64() * 1e3,
            ranker_ms: out.counter.wall_time.as_secs_f64() * 1e3,
            escaped_docs: out.escaped(&r0),
        };
        Ok(Some((entries, t)))
    }
}

/// Qid-keyed graded judgments straight from a qrels file, by docno.
pub fn read_judgments(path: &Path) -> Result<Judgments> {
    let entries = read_qrels(open(path)?).with_context(|| format!("qrels {}", path.display()))?;
    let mut out: Judgments = BTreeMap::new();
    for e in entries {
        let g = out.entry(e.qid).or_default().entry(e.docno).or_insert(e.grade);
        *g = (*g).max(e.grade);
    }
    Ok(out)
}
