//! Fixed-degree document similarity graph.
//!
//! Every node stores exactly `k` neighbor ids ordered by similarity
//! (descending, ties by id). Slots without a neighbor hold [`NO_NEIGHBOR`].
//! Graph depth ablations truncate rows at query time via `truncate_k` rather
//! than rebuilding.
//!
//! File layout: a JSON header line
//! `{"version":1,"k":16,"count":N,"source":"lexical","sentinel":4294967295}`
//! followed by `N` rows of `k` little-endian `u32` ids (row `i` is `DocId(i)`),
//! with a companion `docnos.txt` next to it.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusStore, DocId};
use crate::dense::{dot, EmbeddingTable};
use crate::lexical::{tokenize, InvertedIndex};
use crate::ranking::{Ranking, Scored};

/// Padding id for rows with fewer than `k` neighbors.
pub const NO_NEIGHBOR: u32 = u32::MAX;

pub const GRAPH_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilaritySource {
    Lexical,
    Dense,
}

impl std::str::FromStr for SimilaritySource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lexical" | "bm25" => Ok(Self::Lexical),
            "dense" => Ok(Self::Dense),
            other => Err(format!("unknown graph source {other:?}")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("k = {k} needs more than {count} documents")]
    KTooLarge { k: usize, count: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("truncate_k = {truncate_k} exceeds graph degree {k}")]
    TruncateTooDeep { truncate_k: usize, k: usize },
    #[error("invalid adjacency at node {node}: {reason}")]
    InvalidRow { node: usize, reason: String },
    #[error("graph file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphHeader {
    version: u32,
    k: usize,
    count: usize,
    source: SimilaritySource,
    #[serde(default = "default_sentinel")]
    sentinel: u32,
}

fn default_sentinel() -> u32 {
    NO_NEIGHBOR
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusGraph {
    k: usize,
    source: SimilaritySource,
    adjacency: Vec<u32>,
}

impl CorpusGraph {
    /// Builds a graph from explicit neighbor lists. Rows shorter than `k` are
    /// padded with [`NO_NEIGHBOR`].
    pub fn from_rows(k: usize, source: SimilaritySource, rows: Vec<Vec<DocId>>) -> Result<Self, GraphError> {
        let n = rows.len();
        let mut adjacency = Vec::with_capacity(n * k);
        for (node, row) in rows.into_iter().enumerate() {
            if row.len() > k {
                return Err(GraphError::InvalidRow {
                    node,
                    reason: format!("{} neighbors for k = {k}", row.len()),
                });
            }
            let mut seen = HashSet::with_capacity(row.len());
            for d in &row {
                if d.index() == node {
                    return Err(GraphError::InvalidRow {
                        node,
                        reason: "self loop".into(),
                    });
                }
                if d.index() >= n || !seen.insert(*d) {
                    return Err(GraphError::InvalidRow {
                        node,
                        reason: format!("bad neighbor {d}"),
                    });
                }
            }
            let pad = k - row.len();
            adjacency.extend(row.into_iter().map(|d| d.0));
            adjacency.extend(std::iter::repeat_n(NO_NEIGHBOR, pad));
        }
        Ok(Self { k, source, adjacency })
    }

    /// A graph with no edges at all.
    pub fn empty(n: usize, k: usize, source: SimilaritySource) -> Self {
        Self {
            k,
            source,
            adjacency: vec![NO_NEIGHBOR; n * k],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn source(&self) -> SimilaritySource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.adjacency.len().checked_div(self.k).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Raw fixed-width row, sentinels included.
    pub fn row(&self, node: DocId) -> &[u32] {
        &self.adjacency[node.index() * self.k..(node.index() + 1) * self.k]
    }

    /// The first `depth` neighbors of `node`, sentinels skipped.
    pub fn neighbors(&self, node: DocId, depth: usize) -> impl Iterator<Item = DocId> + '_ {
        self.row(node)[..depth.min(self.k)]
            .iter()
            .filter(|&&d| d != NO_NEIGHBOR)
            .map(|&d| DocId(d))
    }

    pub fn write(&self, path: &Path, store: &CorpusStore) -> Result<(), GraphError> {
        if store.len() != self.len() {
            return Err(GraphError::Format(format!(
                "graph has {} nodes, store has {}",
                self.len(),
                store.len()
            )));
        }
        let mut out = BufWriter::new(File::create(path)?);
        let header = GraphHeader {
            version: GRAPH_VERSION,
            k: self.k,
            count: self.len(),
            source: self.source,
            sentinel: NO_NEIGHBOR,
        };
        serde_json::to_writer(&mut out, &header).map_err(|e| GraphError::Format(e.to_string()))?;
        out.write_all(b"\n")?;
        for id in &self.adjacency {
            out.write_all(&id.to_le_bytes())?;
        }
        out.flush()?;

        let mut docnos = BufWriter::new(File::create(docnos_path(path))?);
        for d in store.docnos() {
            writeln!(docnos, "{d}")?;
        }
        docnos.flush()?;
        Ok(())
    }

    /// Reads a graph file. When `store` is given, the companion docno list
    /// must match it exactly.
    pub fn read(path: &Path, store: Option<&CorpusStore>) -> Result<Self, GraphError> {
        let mut input = BufReader::new(File::open(path)?);
        let mut line = String::new();
        input.read_line(&mut line)?;
        let header: GraphHeader =
            serde_json::from_str(line.trim_end()).map_err(|e| GraphError::Format(e.to_string()))?;
        if header.version != GRAPH_VERSION {
            return Err(GraphError::Format(format!(
                "unsupported version {}",
                header.version
            )));
        }
        if header.sentinel != NO_NEIGHBOR {
            return Err(GraphError::Format(format!(
                "unsupported sentinel {}",
                header.sentinel
            )));
        }
        let mut raw = Vec::new();
        input.read_to_end(&mut raw)?;
        if raw.len() != header.count * header.k * 4 {
            return Err(GraphError::Format(format!(
                "expected {} rows of {} ids, found {} bytes",
                header.count,
                header.k,
                raw.len()
            )));
        }
        let adjacency: Vec<u32> = raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        for (i, &d) in adjacency.iter().enumerate() {
            let node = i / header.k.max(1);
            if d != NO_NEIGHBOR && (d as usize >= header.count || d as usize == node) {
                return Err(GraphError::InvalidRow {
                    node,
                    reason: format!("bad neighbor id {d}"),
                });
            }
        }
        if let Some(store) = store {
            if store.len() != header.count {
                return Err(GraphError::Format(format!(
                    "graph has {} nodes, store has {}",
                    header.count,
                    store.len()
                )));
            }
            let docnos = BufReader::new(File::open(docnos_path(path))?);
            for (i, l) in docnos.lines().enumerate() {
                let l = l?;
                if store.get(DocId(i as u32)).map(|d| d.docno.as_str()) != Some(l.as_str()) {
                    return Err(GraphError::Format(format!("docno mismatch at id {i}")));
                }
            }
        }
        Ok(Self {
            k: header.k,
            source: header.source,
            adjacency,
        })
    }
}

/// `docnos.txt` in the graph file's directory.
pub fn docnos_path(graph: &Path) -> PathBuf {
    graph
        .parent()
        .map(|p| p.join("docnos.txt"))
        .unwrap_or_else(|| PathBuf::from("docnos.txt"))
}

fn check_k(k: usize, count: usize) -> Result<(), GraphError> {
    if k == 0 {
        Err(GraphError::ZeroK)
    } else if k >= count {
        Err(GraphError::KTooLarge { k, count })
    } else {
        Ok(())
    }
}

/// Issues every document's text as a BM25 query; its neighbors are the top
/// `k` other documents. Only documents sharing a term can score above zero,
/// and those are exactly the ones the postings traversal visits.
pub fn build_graph_lexical(
    index: &InvertedIndex,
    store: &CorpusStore,
    k: usize,
) -> Result<CorpusGraph, GraphError> {
    check_k(k, store.len())?;
    let rows: Vec<Vec<DocId>> = store
        .ids()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|d| {
            let weighted = index.weigh_tokens(tokenize(store.text(d)));
            let exclude = HashSet::from([d]);
            index.score_terms(&weighted, k, Some(&exclude)).ids()
        })
        .collect();
    CorpusGraph::from_rows(k, SimilaritySource::Lexical, rows)
}

/// Exhaustive inner-product neighbors.
pub fn build_graph_dense(table: &EmbeddingTable, k: usize) -> Result<CorpusGraph, GraphError> {
    let n = table.len();
    check_k(k, n)?;
    let rows: Vec<Vec<DocId>> = (0..n as u32)
        .into_par_iter()
        .map(|i| {
            let v = table.vector(DocId(i));
            let candidates = (0..n as u32)
                .filter(|&j| j != i)
                .map(|j| Scored::new(DocId(j), dot(v, table.vector(DocId(j)))))
                .collect();
            Ranking::top_k(candidates, k).ids()
        })
        .collect();
    CorpusGraph::from_rows(k, SimilaritySource::Dense, rows)
}

/// Expands a scored batch through the graph.
///
/// Sources are visited by pseudo-score descending and each contributes its
/// first `truncate_k` neighbors in list order. A candidate reachable from
/// several sources keeps its earliest position; batch members never appear.
pub fn neighbours(graph: &CorpusGraph, batch: &[Scored], truncate_k: usize) -> Vec<DocId> {
    let mut sources: Vec<&Scored> = batch.iter().collect();
    sources.sort_by(|a, b| b.score.total_cmp(&a.score));
    let in_batch: HashSet<DocId> = batch.iter().map(|s| s.doc).collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for s in sources {
        for n in graph.neighbors(s.doc, truncate_k) {
            if !in_batch.contains(&n) && seen.insert(n) {
                out.push(n);
            }
        }
    }
    out
}
