use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;

use super::tokenize::tokenize;
use super::LexicalError;
use crate::corpus::{CorpusStore, DocId};
use crate::ranking::{Ranking, Scored};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: DocId,
    pub tf: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

/// Term -> postings index with document lengths, plus a forward view
/// (doc -> term frequencies) used by relevance feedback.
#[derive(Debug, Clone)]
pub struct InvertedIndex {
    pub(crate) terms: Vec<String>,
    pub(crate) term_ids: HashMap<String, u32>,
    pub(crate) postings: Vec<Vec<Posting>>,
    pub(crate) doc_lengths: Vec<u32>,
    pub(crate) avg_doc_length: f64,
    pub(crate) forward: Vec<Vec<(u32, u32)>>,
    pub params: Bm25Params,
}

/// Counts tokens, returning `(term, count)` in term order.
pub(crate) fn term_counts(tokens: Vec<String>) -> BTreeMap<String, u32> {
    let mut counts = BTreeMap::new();
    for t in tokens {
        *counts.entry(t).or_insert(0) += 1;
    }
    counts
}

impl InvertedIndex {
    /// Tokenizes every document of the store and builds the index.
    pub fn build(store: &CorpusStore) -> Self {
        let per_doc: Vec<BTreeMap<String, u32>> = store
            .documents()
            .par_iter()
            .map(|d| term_counts(tokenize(&d.text)))
            .collect();
        Self::from_term_counts(per_doc)
    }

    pub(crate) fn from_term_counts(per_doc: Vec<BTreeMap<String, u32>>) -> Self {
        let vocab: std::collections::BTreeSet<&str> = per_doc
            .iter()
            .flat_map(|c| c.keys().map(String::as_str))
            .collect();
        let terms: Vec<String> = vocab.into_iter().map(str::to_owned).collect();
        let term_ids: HashMap<String, u32> = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();

        let mut postings = vec![Vec::new(); terms.len()];
        let mut doc_lengths = Vec::with_capacity(per_doc.len());
        let mut forward = Vec::with_capacity(per_doc.len());
        for (d, counts) in per_doc.iter().enumerate() {
            let mut len = 0u32;
            let mut fwd = Vec::with_capacity(counts.len());
            for (term, &tf) in counts {
                let tid = term_ids[term];
                postings[tid as usize].push(Posting {
                    doc: DocId(d as u32),
                    tf,
                });
                fwd.push((tid, tf));
                len += tf;
            }
            doc_lengths.push(len);
            forward.push(fwd);
        }
        let avg_doc_length = mean(&doc_lengths);
        Self {
            terms,
            term_ids,
            postings,
            doc_lengths,
            avg_doc_length,
            forward,
            params: Bm25Params::default(),
        }
    }

    pub fn doc_count(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_length(&self, doc: DocId) -> u32 {
        self.doc_lengths[doc.index()]
    }

    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    pub fn term_id(&self, term: &str) -> Option<u32> {
        self.term_ids.get(term).copied()
    }

    pub fn term(&self, id: u32) -> &str {
        &self.terms[id as usize]
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.term_id(term)
            .map(|t| self.postings[t as usize].as_slice())
            .unwrap_or(&[])
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    /// `(term id, tf)` pairs of one document, in term order.
    pub fn doc_terms(&self, doc: DocId) -> &[(u32, u32)] {
        &self.forward[doc.index()]
    }

    /// `ln(1 + (N - df + 0.5) / (df + 0.5))`, always positive.
    pub fn idf(&self, df: usize) -> f64 {
        let n = self.doc_count() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_weight(&self, tf: u32, doc: DocId) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = tf as f64;
        let norm = 1.0 - b + b * self.doc_lengths[doc.index()] as f64 / self.avg_doc_length;
        tf * (k1 + 1.0) / (tf + k1 * norm)
    }

    /// Accumulates weighted BM25 contributions over `(term id, weight)` pairs.
    /// Zero-score documents and members of `exclude` are omitted.
    pub(crate) fn score_terms(
        &self,
        weighted: &[(u32, f64)],
        k: usize,
        exclude: Option<&HashSet<DocId>>,
    ) -> Ranking {
        let mut acc: HashMap<DocId, f64> = HashMap::new();
        for &(tid, w) in weighted {
            if w == 0.0 {
                continue;
            }
            let plist = &self.postings[tid as usize];
            let idf = self.idf(plist.len());
            for p in plist {
                *acc.entry(p.doc).or_insert(0.0) += w * idf * self.term_weight(p.tf, p.doc);
            }
        }
        let candidates = acc
            .into_iter()
            .filter(|(d, s)| *s > 0.0 && !exclude.is_some_and(|e| e.contains(d)))
            .map(|(d, s)| Scored::new(d, s))
            .collect();
        Ranking::top_k(candidates, k)
    }

    /// Resolves query tokens to `(term id, query term frequency)`; unknown
    /// terms are skipped.
    pub(crate) fn weigh_tokens(&self, tokens: Vec<String>) -> Vec<(u32, f64)> {
        term_counts(tokens)
            .into_iter()
            .filter_map(|(t, c)| self.term_id(&t).map(|id| (id, c as f64)))
            .collect()
    }

    /// BM25 top-`k` for a free-text query. Repeated query terms count once per
    /// occurrence.
    pub fn bm25_retrieve(&self, query: &str, k: usize) -> Result<Ranking, LexicalError> {
        if k == 0 {
            return Err(LexicalError::ZeroK);
        }
        let weighted = self.weigh_tokens(tokenize(query));
        Ok(self.score_terms(&weighted, k, None))
    }
}

fn mean(lengths: &[u32]) -> f64 {
    if lengths.is_empty() {
        0.0
    } else {
        lengths.iter().map(|&l| l as f64).sum::<f64>() / lengths.len() as f64
    }
}
