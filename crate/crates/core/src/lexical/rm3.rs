//! RM3 pseudo-relevance feedback.
//!
//! The relevance model is estimated from the top feedback documents with
//! maximum-likelihood term distributions (no smoothing), truncated to the
//! strongest `fb_terms` terms and mixed with the original query.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::index::{term_counts, InvertedIndex};
use super::tokenize::{is_stopword, tokenize};
use super::LexicalError;
use crate::corpus::DocId;
use crate::ranking::{Ranking, Scored};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rm3Params {
    pub fb_docs: usize,
    pub fb_terms: usize,
    pub orig_weight: f64,
}

impl Default for Rm3Params {
    fn default() -> Self {
        Self {
            fb_docs: 10,
            fb_terms: 10,
            orig_weight: 0.6,
        }
    }
}

impl Rm3Params {
    pub fn validate(&self) -> Result<(), LexicalError> {
        if self.fb_docs == 0 || self.fb_terms == 0 {
            return Err(LexicalError::InvalidRm3(
                "fb_docs and fb_terms must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.orig_weight) {
            return Err(LexicalError::InvalidRm3(format!(
                "orig_weight {} outside [0, 1]",
                self.orig_weight
            )));
        }
        Ok(())
    }
}

/// Weighted bag of terms. Weights are finite, non-negative and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedQuery {
    pub weights: BTreeMap<String, f64>,
}

impl ExpandedQuery {
    pub fn weight(&self, term: &str) -> f64 {
        self.weights.get(term).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }
}

/// Expands `query` with terms from the feedback ranking.
///
/// Feedback scores are shifted to be non-negative (only when some are
/// negative) and normalized to sum to one; if they are all zero the feedback
/// documents are weighted uniformly.
pub fn rm3_expand(
    index: &InvertedIndex,
    query: &str,
    feedback: &[Scored],
    params: &Rm3Params,
) -> Result<ExpandedQuery, LexicalError> {
    params.validate()?;
    if feedback.is_empty() {
        return Err(LexicalError::EmptyFeedback);
    }
    let fb = &feedback[..feedback.len().min(params.fb_docs)];

    let min = fb.iter().map(|s| s.score).fold(f64::INFINITY, f64::min);
    let shift = if min < 0.0 { -min } else { 0.0 };
    let mut doc_weights: Vec<f64> = fb.iter().map(|s| s.score + shift).collect();
    let total: f64 = doc_weights.iter().sum();
    if total > 0.0 && total.is_finite() {
        doc_weights.iter_mut().for_each(|w| *w /= total);
    } else {
        doc_weights.iter_mut().for_each(|w| *w = 1.0 / fb.len() as f64);
    }

    let mut rm: HashMap<u32, f64> = HashMap::new();
    for (s, dw) in fb.iter().zip(&doc_weights) {
        let len = index.doc_length(s.doc) as f64;
        if len == 0.0 {
            continue;
        }
        for &(tid, tf) in index.doc_terms(s.doc) {
            *rm.entry(tid).or_insert(0.0) += tf as f64 / len * dw;
        }
    }

    let mut terms: Vec<(&str, f64)> = rm
        .into_iter()
        .map(|(tid, w)| (index.term(tid), w))
        .filter(|(t, w)| *w > 0.0 && !is_stopword(t))
        .collect();
    terms.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    terms.truncate(params.fb_terms);
    let rm_total: f64 = terms.iter().map(|t| t.1).sum();

    let q_counts = term_counts(tokenize(query));
    let q_total: u32 = q_counts.values().sum();

    // With one side empty the other carries all the mass.
    let (wq, wrm) = match (q_total > 0, rm_total > 0.0) {
        (true, true) => (params.orig_weight, 1.0 - params.orig_weight),
        (true, false) => (1.0, 0.0),
        (false, true) => (0.0, 1.0),
        (false, false) => return Err(LexicalError::EmptyExpansion),
    };

    let mut weights: BTreeMap<String, f64> = BTreeMap::new();
    if wq > 0.0 {
        for (t, c) in q_counts {
            *weights.entry(t).or_insert(0.0) += wq * c as f64 / q_total as f64;
        }
    }
    if wrm > 0.0 {
        for (t, w) in terms {
            *weights.entry(t.to_string()).or_insert(0.0) += wrm * w / rm_total;
        }
    }
    weights.retain(|_, w| *w > 0.0);
    if weights.is_empty() {
        return Err(LexicalError::EmptyExpansion);
    }
    Ok(ExpandedQuery { weights })
}

/// Weighted BM25 retrieval: each term's contribution is scaled by its weight.
/// Documents in `exclude` are never returned.
pub fn retrieve_expanded(
    index: &InvertedIndex,
    eq: &ExpandedQuery,
    k: usize,
    exclude: &HashSet<DocId>,
) -> Result<Ranking, LexicalError> {
    if k == 0 {
        return Err(LexicalError::ZeroK);
    }
    let weighted: Vec<(u32, f64)> = eq
        .weights
        .iter()
        .filter_map(|(t, w)| index.term_id(t).map(|id| (id, *w)))
        .collect();
    Ok(index.score_terms(&weighted, k, Some(exclude)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CorpusStore, Document};

    fn index(texts: &[&str]) -> InvertedIndex {
        let store = CorpusStore::from_documents(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| Document {
                    docno: format!("d{}", i + 1),
                    text: t.to_string(),
                })
                .collect(),
        )
        .unwrap();
        InvertedIndex::build(&store)
    }

    fn fb(ids: &[u32]) -> Vec<Scored> {
        ids.iter()
            .enumerate()
            .map(|(r, &d)| Scored::new(DocId(d), 1.0 / (r + 1) as f64))
            .collect()
    }

    #[test]
    fn single_doc_mixture() {
        let idx = index(&["cat cat dog", "dog dog dog"]);
        let params = Rm3Params {
            fb_terms: 2,
            ..Default::default()
        };
        let eq = rm3_expand(&idx, "cat", &fb(&[0]), &params).unwrap();
        assert!((eq.weight("cat") - (0.6 + 0.4 * 2.0 / 3.0)).abs() < 1e-12);
        assert!((eq.weight("dog") - 0.4 / 3.0).abs() < 1e-12);
        assert!((eq.weight("cat") - 0.8667).abs() < 1e-4);
    }

    #[test]
    fn mixture_endpoints() {
        let idx = index(&["cat cat dog", "dog dog dog", "bird cat"]);
        let only_query = Rm3Params {
            orig_weight: 1.0,
            ..Default::default()
        };
        let eq = rm3_expand(&idx, "cat bird", &fb(&[0, 1]), &only_query).unwrap();
        assert_eq!(eq.weights.len(), 2);
        assert_eq!(eq.weight("cat"), 0.5);
        assert_eq!(eq.weight("bird"), 0.5);

        let only_fb = Rm3Params {
            orig_weight: 0.0,
            ..Default::default()
        };
        let eq = rm3_expand(&idx, "bird", &fb(&[0]), &only_fb).unwrap();
        assert!((eq.weight("cat") - 2.0 / 3.0).abs() < 1e-12);
        assert!((eq.weight("dog") - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(eq.weight("bird"), 0.0);
    }

    #[test]
    fn fb_terms_truncates_then_renormalizes() {
        let idx = index(&["a1 a1 a1 b2 b2 c3"]);
        let p = Rm3Params {
            fb_terms: 2,
            orig_weight: 0.0,
            ..Default::default()
        };
        let eq = rm3_expand(&idx, "zzz", &fb(&[0]), &p).unwrap();
        assert!((eq.weight("a1") - 0.6).abs() < 1e-12);
        assert!((eq.weight("b2") - 0.4).abs() < 1e-12);
        assert_eq!(eq.weight("c3"), 0.0);
    }

    #[test]
    fn zero_scores_fall_back_to_uniform() {
        let idx = index(&["cat", "dog"]);
        let zero = vec![Scored::new(DocId(0), 0.0), Scored::new(DocId(1), 0.0)];
        let p = Rm3Params {
            orig_weight: 0.0,
            ..Default::default()
        };
        let eq = rm3_expand(&idx, "x", &zero, &p).unwrap();
        assert_eq!(eq.weight("cat"), 0.5);
        assert_eq!(eq.weight("dog"), 0.5);
    }

    #[test]
    fn negative_scores_are_shifted() {
        let idx = index(&["cat", "dog"]);
        let neg = vec![Scored::new(DocId(0), -1.0), Scored::new(DocId(1), -3.0)];
        let p = Rm3Params {
            orig_weight: 0.0,
            ..Default::default()
        };
        let eq = rm3_expand(&idx, "x", &neg, &p).unwrap();
        assert_eq!(eq.weight("cat"), 1.0);
    }

    #[test]
    fn bad_params_and_empty_feedback() {
        let idx = index(&["cat"]);
        assert!(matches!(
            rm3_expand(&idx, "cat", &[], &Rm3Params::default()),
            Err(LexicalError::EmptyFeedback)
        ));
        let p = Rm3Params {
            orig_weight: 1.5,
            ..Default::default()
        };
        assert!(rm3_expand(&idx, "cat", &fb(&[0]), &p).is_err());
    }

    #[test]
    fn expanded_single_term_matches_bm25() {
        let idx = index(&["cat cat dog", "dog dog dog", "cat bird", "fish"]);
        let eq = ExpandedQuery {
            weights: [("cat".to_string(), 1.0)].into(),
        };
        let a = retrieve_expanded(&idx, &eq, 10, &HashSet::new()).unwrap();
        let b = idx.bm25_retrieve("cat", 10).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exclusion_of_all_matches() {
        let idx = index(&["cat cat dog", "dog dog dog", "cat bird"]);
        let eq = ExpandedQuery {
            weights: [("cat".to_string(), 1.0)].into(),
        };
        let exclude: HashSet<DocId> = [DocId(0), DocId(2)].into();
        assert!(retrieve_expanded(&idx, &eq, 10, &exclude).unwrap().is_empty());
    }

    #[test]
    fn weighted_two_doc_ordering() {
        let idx = index(&["cat cat dog", "dog dog dog"]);
        let eq = ExpandedQuery {
            weights: [("cat".to_string(), 0.8667), ("dog".to_string(), 0.1333)].into(),
        };
        let r = retrieve_expanded(&idx, &eq, 10, &HashSet::new()).unwrap();
        // hand evaluation: idf(cat)=ln 2, idf(dog)=ln(1+0.5/2.5)=ln 1.2, avgdl=3, both |d|=3
        let tfw = |tf: f64| tf * 2.2 / (tf + 1.2);
        let d1 = 0.8667 * 2f64.ln() * tfw(2.0) + 0.1333 * 1.2f64.ln() * tfw(1.0);
        let d2 = 0.1333 * 1.2f64.ln() * tfw(3.0);
        assert_eq!(r.ids(), vec![DocId(0), DocId(1)]);
        assert!((r.entries[0].score - d1).abs() < 1e-12);
        assert!((r.entries[1].score - d2).abs() < 1e-12);
    }
}
