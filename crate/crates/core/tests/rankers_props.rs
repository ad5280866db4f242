use std::collections::HashSet;
use std::sync::Arc;
use std::time::Duration;

use proptest::prelude::*;

use slidegar::corpus::{CorpusStore, Document, QrelTable};
use slidegar::graph::{CorpusGraph, SimilaritySource};
use slidegar::rankers::mock::{MockRankServer, Reply};
use slidegar::rankers::{
    checked_rank, Batch, CallCounter, IdentityRanker, ListwiseRanker, NoisyOracleRanker, OracleRanker,
    RankError, RemoteConfig, RemoteRanker, ReverseRanker, Window,
};
use slidegar::rerank::{slidegar, RerankConfig};
use slidegar::{DocId, Query};

fn store(n: usize) -> CorpusStore {
    CorpusStore::from_documents(
        (0..n)
            .map(|i| Document {
                docno: format!("d{i}"),
                text: format!("body of document {i}"),
            })
            .collect(),
    )
    .unwrap()
}

fn qrels(n: u32) -> Arc<QrelTable> {
    let mut t = QrelTable::default();
    for i in 0..n {
        t.insert_max("q", DocId(i), (i * 7) % 4);
    }
    Arc::new(t)
}

/// Corrupts the identity ordering in one of several ways.
struct Mangler(u8);

impl ListwiseRanker for Mangler {
    fn rank(&self, w: &Window<'_>) -> Result<Batch, RankError> {
        let mut o = w.docnos();
        match self.0 % 5 {
            0 => {}
            1 => {
                o.pop();
            }
            2 => o.push(o[0].clone()),
            3 => o[0] = "stranger".into(),
            _ => {
                let last = o.len() - 1;
                o[last] = o[0].clone();
            }
        }
        Ok(Batch { ordering: o })
    }
}

proptest! {
    #[test]
    fn only_permutations_get_through(mode in 0u8..5, len in 2usize..12) {
        let s = store(20);
        let q = Query::new("q", "x");
        let ids: Vec<DocId> = (0..len as u32).map(DocId).collect();
        let w = Window::from_ids(&q, &s, &ids);
        let mut counter = CallCounter::default();
        let r = checked_rank(&Mangler(mode), &w, &mut counter);
        prop_assert_eq!(counter.calls, 1);
        if mode == 0 {
            prop_assert_eq!(r.unwrap(), ids);
        } else {
            let is_perm_error = matches!(r, Err(RankError::NotPermutation(_)));
            prop_assert!(is_perm_error);
        }
    }

    #[test]
    fn built_in_rankers_permute(len in 1usize..20, seed in any::<u64>(), p in 0.0f64..=1.0) {
        let s = store(20);
        let q = Query::new("q", "x");
        let ids: Vec<DocId> = (0..len as u32).rev().map(DocId).collect();
        let w = Window::from_ids(&q, &s, &ids);
        let t = qrels(20);
        let rankers: Vec<Box<dyn ListwiseRanker>> = vec![
            Box::new(IdentityRanker),
            Box::new(ReverseRanker),
            Box::new(OracleRanker::new(Arc::clone(&t))),
            Box::new(NoisyOracleRanker::new(Arc::clone(&t), p, seed).unwrap()),
        ];
        for r in &rankers {
            let mut c = CallCounter::default();
            let out = checked_rank(r.as_ref(), &w, &mut c).unwrap();
            let set: HashSet<DocId> = out.iter().copied().collect();
            prop_assert_eq!(set, ids.iter().copied().collect::<HashSet<_>>());
        }
    }

    #[test]
    fn noiseless_noisy_oracle_is_the_oracle(len in 1usize..20, seed in any::<u64>()) {
        let s = store(20);
        let q = Query::new("q", "x");
        let ids: Vec<DocId> = (0..len as u32).map(DocId).collect();
        let w = Window::from_ids(&q, &s, &ids);
        let t = qrels(20);
        let a = OracleRanker::new(Arc::clone(&t)).rank(&w).unwrap();
        let b = NoisyOracleRanker::new(Arc::clone(&t), 0.0, seed).unwrap().rank(&w).unwrap();
        prop_assert_eq!(a.ordering, b.ordering);
        let n1 = NoisyOracleRanker::new(Arc::clone(&t), 0.4, seed).unwrap();
        prop_assert_eq!(n1.rank(&w).unwrap().ordering, n1.rank(&w).unwrap().ordering);
    }
}

#[test]
fn pipeline_survives_malformed_remote_responses() {
    let server = MockRankServer::start(
        vec![
            Reply::Duplicate,
            Reply::Garbage,
            Reply::Duplicate,
            Reply::Duplicate,
            Reply::Duplicate,
        ],
        Reply::Reverse,
    );
    let ranker = RemoteRanker::with_auth(
        RemoteConfig {
            endpoint: server.endpoint(),
            timeout_ms: 2_000,
            retries: 1,
            backoff_ms: 1,
            ..Default::default()
        },
        None,
    )
    .unwrap();
    let s = store(60);
    let g = CorpusGraph::empty(60, 2, SimilaritySource::Dense);
    let r0: Vec<DocId> = (0..60).map(DocId).collect();
    let cfg = RerankConfig::new(20, 10, 50).with_truncate_k(2);
    let out = slidegar(&Query::new("q", "x"), &r0, &ranker, &s, &g, &cfg).unwrap();
    assert_eq!(out.counter.calls, 4);
    // first call: two invalid replies, degraded. second: garbage then bad, degraded.
    assert_eq!(ranker.degradations(), 2);
    let ids = out.ranking.ids();
    assert_eq!(ids.len(), 50);
    assert_eq!(ids.iter().collect::<HashSet<_>>().len(), 50);
}

#[test]
fn remote_timeouts_then_success_counts_one_call() {
    let server = MockRankServer::start(
        vec![
            Reply::Delay(Duration::from_millis(600)),
            Reply::Delay(Duration::from_millis(600)),
        ],
        Reply::Echo,
    );
    let ranker = RemoteRanker::with_auth(
        RemoteConfig {
            endpoint: server.endpoint(),
            timeout_ms: 200,
            retries: 3,
            backoff_ms: 1,
            ..Default::default()
        },
        None,
    )
    .unwrap();
    let s = store(3);
    let q = Query::new("q", "x");
    let ids = vec![DocId(2), DocId(0), DocId(1)];
    let mut c = CallCounter::default();
    assert_eq!(
        checked_rank(&ranker, &Window::from_ids(&q, &s, &ids), &mut c).unwrap(),
        ids
    );
    assert_eq!(c.calls, 1);
    assert_eq!(server.requests(), 3);
}
