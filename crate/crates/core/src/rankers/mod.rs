//! The listwise ranker contract.
//!
//! A ranker receives a [`Window`] of candidates and returns a [`Batch`]: the
//! same docnos, best first, with no scores. Callers go through
//! [`checked_rank`], which counts the call, times it and refuses any response
//! that is not an exact permutation of the window.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::corpus::{CorpusStore, DocId, Query};

pub mod mock;
mod oracle;
mod remote;

pub use oracle::{IdentityRanker, NoisyOracleRanker, OracleRanker, ReverseRanker};
pub use remote::{RemoteConfig, RemoteRanker, AUTH_ENV_VAR};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowDoc<'a> {
    pub id: DocId,
    pub docno: &'a str,
    pub text: &'a str,
}

/// Candidates sent to a ranker in one call, in current list order.
#[derive(Debug, Clone)]
pub struct Window<'a> {
    pub query: &'a Query,
    pub docs: Vec<WindowDoc<'a>>,
}

impl<'a> Window<'a> {
    pub fn from_ids(query: &'a Query, store: &'a CorpusStore, ids: &[DocId]) -> Self {
        Self {
            query,
            docs: ids
                .iter()
                .map(|&id| {
                    let d = store.doc(id);
                    WindowDoc {
                        id,
                        docno: &d.docno,
                        text: &d.text,
                    }
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn docnos(&self) -> Vec<String> {
        self.docs.iter().map(|d| d.docno.to_string()).collect()
    }
}

/// A ranker's answer: docnos, best first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub ordering: Vec<String>,
}

impl Batch {
    pub fn from_window(window: &Window<'_>, order: impl IntoIterator<Item = usize>) -> Self {
        Self {
            ordering: order
                .into_iter()
                .map(|i| window.docs[i].docno.to_string())
                .collect(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RankError {
    #[error("empty window")]
    EmptyWindow,
    #[error("ranker response is not a permutation of the window: {0}")]
    NotPermutation(String),
    #[error("ranker transport failure after {attempts} attempts: {last}")]
    Transport { attempts: u32, last: String },
    #[error("{0}")]
    Other(String),
}

/// Number of ranker invocations and the time spent inside them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CallCounter {
    pub calls: u64,
    #[serde(serialize_with = "ser_ms")]
    pub wall_time: Duration,
}

fn ser_ms<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64() * 1e3)
}

impl CallCounter {
    pub fn record(&mut self, elapsed: Duration) {
        self.calls += 1;
        self.wall_time += elapsed;
    }
}

pub trait ListwiseRanker: Send + Sync {
    fn rank(&self, window: &Window<'_>) -> Result<Batch, RankError>;

    fn name(&self) -> &str {
        "ranker"
    }
}

impl<R: ListwiseRanker + ?Sized> ListwiseRanker for Box<R> {
    fn rank(&self, window: &Window<'_>) -> Result<Batch, RankError> {
        (**self).rank(window)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

impl<R: ListwiseRanker + ?Sized> ListwiseRanker for std::sync::Arc<R> {
    fn rank(&self, window: &Window<'_>) -> Result<Batch, RankError> {
        (**self).rank(window)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

/// Maps `ordering` onto window positions, failing unless it names every
/// window docno exactly once.
pub fn permutation_of(window: &Window<'_>, ordering: &[String]) -> Result<Vec<usize>, RankError> {
    if ordering.len() != window.len() {
        return Err(RankError::NotPermutation(format!(
            "{} docnos for a window of {}",
            ordering.len(),
            window.len()
        )));
    }
    let pos: HashMap<&str, usize> = window
        .docs
        .iter()
        .enumerate()
        .map(|(i, d)| (d.docno, i))
        .collect();
    let mut used = vec![false; window.len()];
    ordering
        .iter()
        .map(|d| match pos.get(d.as_str()) {
            None => Err(RankError::NotPermutation(format!("unknown docno {d:?}"))),
            Some(&i) if used[i] => Err(RankError::NotPermutation(format!("duplicate docno {d:?}"))),
            Some(&i) => {
                used[i] = true;
                Ok(i)
            }
        })
        .collect()
}

/// Invokes the ranker once, records the call, and returns the ranked ids.
pub fn checked_rank(
    ranker: &dyn ListwiseRanker,
    window: &Window<'_>,
    counter: &mut CallCounter,
) -> Result<Vec<DocId>, RankError> {
    if window.is_empty() {
        return Err(RankError::EmptyWindow);
    }
    let start = Instant::now();
    let result = ranker.rank(window);
    counter.record(start.elapsed());
    let batch = result?;
    let perm = permutation_of(window, &batch.ordering)?;
    Ok(perm.into_iter().map(|i| window.docs[i].id).collect())
}
