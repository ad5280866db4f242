use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Batch, ListwiseRanker, RankError, Window};
use crate::corpus::QrelTable;

/// Returns the window unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityRanker;

impl ListwiseRanker for IdentityRanker {
    fn rank(&self, window: &Window<'_>) -> Result<Batch, RankError> {
        Ok(Batch::from_window(window, 0..window.len()))
    }

    fn name(&self) -> &str {
        "identity"
    }
}

/// Returns the window reversed.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReverseRanker;

impl ListwiseRanker for ReverseRanker {
    fn rank(&self, window: &Window<'_>) -> Result<Batch, RankError> {
        Ok(Batch::from_window(window, (0..window.len()).rev()))
    }

    fn name(&self) -> &str {
        "reverse"
    }
}

/// Orders by judged grade, descending; unjudged documents count as grade 0.
/// Ties keep window order.
#[derive(Debug, Clone)]
pub struct OracleRanker {
    qrels: Arc<QrelTable>,
}

impl OracleRanker {
    pub fn new(qrels: Arc<QrelTable>) -> Self {
        Self { qrels }
    }

    fn order(&self, window: &Window<'_>) -> Vec<usize> {
        let qid = &window.query.qid;
        let mut order: Vec<usize> = (0..window.len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(self.qrels.grade(qid, window.docs[i].id)));
        order
    }
}

impl ListwiseRanker for OracleRanker {
    fn rank(&self, window: &Window<'_>) -> Result<Batch, RankError> {
        Ok(Batch::from_window(window, self.order(window)))
    }

    fn name(&self) -> &str {
        "oracle"
    }
}

/// The oracle ordering followed by one pass of adjacent swaps, each taken
/// with probability `swap_prob`. The generator is seeded from the configured
/// seed, the qid and the window's docnos, so a given window always gets the
/// same answer regardless of call order.
#[derive(Debug, Clone)]
pub struct NoisyOracleRanker {
    oracle: OracleRanker,
    swap_prob: f64,
    seed: u64,
}

impl NoisyOracleRanker {
    pub fn new(qrels: Arc<QrelTable>, swap_prob: f64, seed: u64) -> Result<Self, RankError> {
        if !(0.0..=1.0).contains(&swap_prob) {
            return Err(RankError::Other(format!("swap_prob {swap_prob} outside [0, 1]")));
        }
        Ok(Self {
            oracle: OracleRanker::new(qrels),
            swap_prob,
            seed,
        })
    }

    fn window_seed(&self, window: &Window<'_>) -> u64 {
        // FNV-1a over qid and docnos, each terminated by 0xff
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ self.seed;
        let mut feed = |bytes: &[u8]| {
            for &b in bytes.iter().chain(&[0xff]) {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        feed(window.query.qid.as_bytes());
        for d in &window.docs {
            feed(d.docno.as_bytes());
        }
        h
    }
}

impl ListwiseRanker for NoisyOracleRanker {
    fn rank(&self, window: &Window<'_>) -> Result<Batch, RankError> {
        let mut order = self.oracle.order(window);
        let mut rng = ChaCha8Rng::seed_from_u64(self.window_seed(window));
        for i in 0..order.len().saturating_sub(1) {
            if rng.gen_bool(self.swap_prob) {
                order.swap(i, i + 1);
            }
        }
        Ok(Batch::from_window(window, order))
    }

    fn name(&self) -> &str {
        "noisy_oracle"
    }
}
