use std::cmp::Ordering;

use crate::corpus::DocId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub doc: DocId,
    pub score: f64,
}

impl Scored {
    pub fn new(doc: DocId, score: f64) -> Self {
        Self { doc, score }
    }
}

/// Score descending, then id ascending. The one total order used for every
/// ranked list in the crate.
pub fn by_score_then_id(a: &Scored, b: &Scored) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.doc.cmp(&b.doc))
}

/// An ordered list of scored documents.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ranking {
    pub entries: Vec<Scored>,
}

impl Ranking {
    /// Sorts `candidates` with [`by_score_then_id`] and keeps the first `k`.
    pub fn top_k(mut candidates: Vec<Scored>, k: usize) -> Self {
        if candidates.len() > k && k > 0 {
            candidates.select_nth_unstable_by(k - 1, by_score_then_id);
            candidates.truncate(k);
        }
        candidates.sort_unstable_by(by_score_then_id);
        candidates.truncate(k);
        Self { entries: candidates }
    }

    /// Attaches strictly decreasing scores `1/position` to an ordering.
    pub fn from_order(order: impl IntoIterator<Item = DocId>) -> Self {
        Self {
            entries: order
                .into_iter()
                .enumerate()
                .map(|(i, doc)| Scored::new(doc, 1.0 / (i + 1) as f64))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<DocId> {
        self.entries.iter().map(|s| s.doc).collect()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Scored> {
        self.entries.iter()
    }

    pub fn truncate(&mut self, k: usize) {
        self.entries.truncate(k);
    }
}

impl<'a> IntoIterator for &'a Ranking {
    type Item = &'a Scored;
    type IntoIter = std::slice::Iter<'a, Scored>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}
