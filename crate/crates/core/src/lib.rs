//! Adaptive retrieval for listwise rerankers.
//!
//! Listwise rankers (typically LLMs) reorder a window of candidates but give
//! no scores, so score-driven adaptive retrieval cannot use them directly.
//! This crate implements a sliding-window reranker that, after each ranker
//! call, pulls fresh candidates from the corpus-graph neighborhood of the
//! best documents seen so far, alternating with the initial ranking. The
//! number of ranker calls stays exactly that of a standard sliding window.
//!
//! # Modules
//!
//! - [`corpus`]: documents, queries, judgments, dedup
//! - [`lexical`]: tokenizer, BM25 inverted index, RM3 expansion
//! - [`dense`]: precomputed embeddings and exact inner-product search
//! - [`graph`]: fixed-degree document similarity graphs
//! - [`rankers`]: the listwise ranker contract, test doubles, HTTP client
//! - [`rerank`]: the adaptive and baseline sliding-window strategies
//! - [`eval`]: nDCG, recall, TREC run files, run comparison
//! - [`synth`]: synthetic collections for end-to-end checks
//!
//! # Example
//!
//! ```
//! use std::sync::Arc;
//! use slidegar::corpus::{ingest_corpus, map_qrels, read_qrels, Query};
//! use slidegar::graph::build_graph_lexical;
//! use slidegar::lexical::InvertedIndex;
//! use slidegar::rankers::OracleRanker;
//! use slidegar::rerank::{slidegar, RerankConfig};
//!
//! let corpus = "a\tsolar panels on roofs\nb\tsolar battery storage\nc\troof tiles\nd\tbattery storage cells\n";
//! let (store, _) = ingest_corpus(corpus.as_bytes(), false).unwrap();
//! let index = InvertedIndex::build(&store);
//! let graph = build_graph_lexical(&index, &store, 2).unwrap();
//!
//! let (qrels, _) = map_qrels(&read_qrels("1 0 d 2\n".as_bytes()).unwrap(), &store);
//! let ranker = OracleRanker::new(Arc::new(qrels));
//!
//! let query = Query::new("1", "solar");
//! let initial = index.bm25_retrieve(&query.text, 10).unwrap().ids();
//! let cfg = RerankConfig::new(2, 1, 4).with_truncate_k(2);
//! let out = slidegar(&query, &initial, &ranker, &store, &graph, &cfg).unwrap();
//!
//! // "d" never matched the query but was reached through the graph
//! assert_eq!(store.docno(out.ranking.entries[0].doc), "d");
//! assert_eq!(out.escaped(&initial), 1);
//! ```

pub mod corpus;
pub mod dense;
pub mod eval;
pub mod graph;
pub mod lexical;
pub mod rankers;
pub mod ranking;
pub mod rerank;
pub mod synth;

pub use corpus::{CorpusStore, DocId, Document, Query};
pub use ranking::{Ranking, Scored};

// Compiles the guide's code blocks as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/retrieval.md")]
    mod retrieval {}
    #[doc = include_str!("../../../book/src/corpus-graphs.md")]
    mod corpus_graphs {}
    #[doc = include_str!("../../../book/src/rankers.md")]
    mod rankers {}
    #[doc = include_str!("../../../book/src/adaptive-reranking.md")]
    mod adaptive_reranking {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/synthetic-collections.md")]
    mod synthetic_collections {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
