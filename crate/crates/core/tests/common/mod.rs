#![allow(dead_code)]

use std::collections::HashSet;
use std::sync::Arc;

use slidegar::corpus::{map_qrels, CorpusStore, QrelTable};
use slidegar::dense::EmbeddingTable;
use slidegar::eval::{evaluate, EvalOptions, Judgments, Metric, MetricReport, RunEntry, RunFile};
use slidegar::graph::{build_graph_dense, CorpusGraph};
use slidegar::lexical::{InvertedIndex, Rm3Params};
use slidegar::rankers::{ListwiseRanker, OracleRanker};
use slidegar::rerank::{slidegar, slidegar_rm3, sliding_window_baseline, RerankConfig, RerankOutcome};
use slidegar::synth::{generate, SynthCollection, SynthSpec};
use slidegar::DocId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Baseline,
    SlideGar,
    Rm3,
}

/// A generated collection with every artifact the pipeline needs.
pub struct Fixture {
    pub col: SynthCollection,
    pub store: CorpusStore,
    pub index: InvertedIndex,
    pub table: EmbeddingTable,
    pub graph: CorpusGraph,
    pub qrels: Arc<QrelTable>,
    pub judgments: Judgments,
}

impl Fixture {
    pub fn new(spec: &SynthSpec) -> Self {
        let col = generate(spec).unwrap();
        let store = col.store();
        let index = InvertedIndex::build(&store);
        let table = EmbeddingTable::from_file(col.doc_embeddings.clone(), &store, false).unwrap();
        let graph = build_graph_dense(&table, 16).unwrap();
        let (qrels, absent) = map_qrels(&col.qrels, &store);
        assert!(absent.is_empty());
        let judgments = qrels.by_docno(&store);
        Self {
            col,
            store,
            index,
            table,
            graph,
            qrels: Arc::new(qrels),
            judgments,
        }
    }

    pub fn oracle(&self) -> OracleRanker {
        OracleRanker::new(Arc::clone(&self.qrels))
    }

    pub fn bm25(&self, text: &str, depth: usize) -> Vec<DocId> {
        self.index.bm25_retrieve(text, depth).unwrap().ids()
    }

    pub fn hidden_ids(&self, qid: &str) -> HashSet<DocId> {
        self.col.hidden[qid]
            .iter()
            .map(|d| self.store.id_of(d).unwrap())
            .collect()
    }

    pub fn rerank(
        &self,
        strategy: Strategy,
        ranker: &dyn ListwiseRanker,
        cfg: &RerankConfig,
    ) -> Vec<(String, RerankOutcome)> {
        self.col
            .queries
            .iter()
            .map(|q| {
                let r0 = self.bm25(&q.text, cfg.budget);
                let out = match strategy {
                    Strategy::Baseline => sliding_window_baseline(q, &r0, ranker, &self.store, cfg),
                    Strategy::SlideGar => slidegar(q, &r0, ranker, &self.store, &self.graph, cfg),
                    Strategy::Rm3 => slidegar_rm3(
                        q,
                        &r0,
                        ranker,
                        &self.store,
                        &self.index,
                        cfg,
                        &Rm3Params::default(),
                    ),
                }
                .unwrap();
                (q.qid.clone(), out)
            })
            .collect()
    }

    pub fn run_file(&self, tag: &str, outcomes: &[(String, RerankOutcome)]) -> RunFile {
        let mut run = RunFile::new(tag);
        for (qid, out) in outcomes {
            let entries = out
                .ranking
                .iter()
                .map(|s| RunEntry {
                    docno: self.store.docno(s.doc).to_string(),
                    score: s.score,
                })
                .collect();
            run.insert(qid, entries).unwrap();
        }
        run
    }

    pub fn report(&self, run: &RunFile, c: usize, rel_threshold: u32) -> MetricReport {
        let opts = EvalOptions {
            rel_threshold,
            ..Default::default()
        };
        evaluate(run, &self.judgments, &[Metric::Ndcg(10), Metric::Recall(c)], opts)
    }
}

pub mod metric_cases;
pub mod oracles;

/// A small random reranking problem over plain ids.
#[derive(Debug, Clone)]
pub struct SmallInstance {
    pub n: usize,
    pub r0: Vec<u32>,
    pub adj: Vec<Vec<u32>>,
    pub k: usize,
    pub grades: std::collections::HashMap<u32, u32>,
    pub w: usize,
    pub b: usize,
    pub c: usize,
    pub tk: usize,
}

impl SmallInstance {
    pub fn random<R: rand::Rng>(rng: &mut R) -> Self {
        use rand::seq::SliceRandom;
        let n = rng.gen_range(2..=30);
        let c = rng.gen_range(2..=12usize);
        let w = rng.gen_range(2..=c);
        let b = rng.gen_range(1..w);
        let k = rng.gen_range(1..=6usize.min(n - 1));
        let tk = rng.gen_range(0..=k);
        let mut ids: Vec<u32> = (0..n as u32).collect();
        ids.shuffle(rng);
        let r0 = ids[..rng.gen_range(1..=n)].to_vec();
        let adj = (0..n as u32)
            .map(|i| {
                let mut others: Vec<u32> = (0..n as u32).filter(|&j| j != i).collect();
                others.shuffle(rng);
                others.truncate(rng.gen_range(0..=k));
                others
            })
            .collect();
        let grades = (0..n as u32)
            .filter_map(|d| {
                let g = rng.gen_range(0..4u32);
                (g > 0).then_some((d, g))
            })
            .collect();
        Self {
            n,
            r0,
            adj,
            k,
            grades,
            w,
            b,
            c,
            tk,
        }
    }

    fn parts(&self) -> (CorpusStore, CorpusGraph, OracleRanker, Vec<DocId>) {
        let store = CorpusStore::from_documents(
            (0..self.n)
                .map(|i| slidegar::Document {
                    docno: format!("n{i:02}"),
                    text: format!("t{i}"),
                })
                .collect(),
        )
        .unwrap();
        let rows = self
            .adj
            .iter()
            .map(|r| r.iter().map(|&d| DocId(d)).collect())
            .collect();
        let graph = CorpusGraph::from_rows(self.k, slidegar::graph::SimilaritySource::Dense, rows).unwrap();
        let mut t = QrelTable::default();
        for (&d, &g) in &self.grades {
            t.insert_max("q", DocId(d), g);
        }
        let r0 = self.r0.iter().map(|&d| DocId(d)).collect();
        (store, graph, OracleRanker::new(Arc::new(t)), r0)
    }

    pub fn engine_adaptive(&self) -> (Vec<u32>, u64) {
        let (store, graph, ranker, r0) = self.parts();
        let cfg = RerankConfig::new(self.w, self.b, self.c).with_truncate_k(self.tk);
        let q = slidegar::Query::new("q", "q");
        let out = slidegar(&q, &r0, &ranker, &store, &graph, &cfg).unwrap();
        (out.ranking.ids().iter().map(|d| d.0).collect(), out.counter.calls)
    }

    pub fn engine_baseline(&self) -> (Vec<u32>, u64) {
        let (store, _, ranker, r0) = self.parts();
        let cfg = RerankConfig::new(self.w, self.b, self.c);
        let q = slidegar::Query::new("q", "q");
        let out = sliding_window_baseline(&q, &r0, &ranker, &store, &cfg).unwrap();
        (out.ranking.ids().iter().map(|d| d.0).collect(), out.counter.calls)
    }

    pub fn simulated_adaptive(&self) -> (Vec<u32>, u64) {
        let (o, c) = oracles::simulate_adaptive(
            &self.r0,
            &self.adj,
            &self.grades,
            (self.w, self.b, self.c, self.tk),
        );
        (o, c as u64)
    }

    pub fn simulated_baseline(&self) -> (Vec<u32>, u64) {
        let (o, c) = oracles::simulate_baseline(&self.r0, &self.grades, (self.w, self.b, self.c));
        (o, c as u64)
    }
}
