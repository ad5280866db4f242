//! HTTP client for rankers hosted elsewhere.
//!
//! Request: `POST {endpoint}/rerank` with
//! `{"qid": .., "query": .., "candidates": [{"docno": .., "text": ..}, ..]}`.
//! Response: `{"ordering": [docno, ..]}` with status 200.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{permutation_of, Batch, ListwiseRanker, RankError, Window};

/// Environment variable whose value, when set, is sent as the
/// `Authorization` header.
pub const AUTH_ENV_VAR: &str = "SLIDEGAR_RANKER_AUTH";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub timeout_ms: u64,
    pub retries: u32,
    /// First backoff delay; doubled after each failed attempt.
    pub backoff_ms: u64,
    /// Per-document cap in whitespace-delimited tokens.
    pub max_doc_tokens: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            timeout_ms: 60_000,
            retries: 3,
            backoff_ms: 500,
            max_doc_tokens: 512,
        }
    }
}

#[derive(Debug, Serialize)]
struct Candidate<'a> {
    docno: &'a str,
    text: String,
}

#[derive(Debug, Serialize)]
struct RerankRequest<'a> {
    qid: &'a str,
    query: &'a str,
    candidates: Vec<Candidate<'a>>,
}

#[derive(Debug, Deserialize)]
struct RerankResponse {
    ordering: Vec<String>,
}

enum Failure {
    Transport(String),
    Invalid(String),
}

pub struct RemoteRanker {
    agent: ureq::Agent,
    url: String,
    auth: Option<String>,
    config: RemoteConfig,
    degradations: AtomicU64,
}

impl std::fmt::Debug for RemoteRanker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteRanker")
            .field("url", &self.url)
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

pub fn truncate_tokens(text: &str, max: usize) -> String {
    text.split_whitespace().take(max).collect::<Vec<_>>().join(" ")
}

impl RemoteRanker {
    /// Reads the credentials header from [`AUTH_ENV_VAR`].
    pub fn new(config: RemoteConfig) -> Result<Self, RankError> {
        let auth = std::env::var(AUTH_ENV_VAR).ok().filter(|v| !v.is_empty());
        Self::with_auth(config, auth)
    }

    pub fn with_auth(config: RemoteConfig, auth: Option<String>) -> Result<Self, RankError> {
        if config.endpoint.is_empty() {
            return Err(RankError::Other("remote ranker needs an endpoint".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            agent,
            url: format!("{}/rerank", config.endpoint.trim_end_matches('/')),
            auth,
            config,
            degradations: AtomicU64::new(0),
        })
    }

    /// Windows answered with their input order because the endpoint never
    /// produced a valid permutation.
    pub fn degradations(&self) -> u64 {
        self.degradations.load(Ordering::Relaxed)
    }

    fn attempt(&self, body: &RerankRequest<'_>, window: &Window<'_>) -> Result<Batch, Failure> {
        let mut req = self.agent.post(&self.url);
        if let Some(a) = &self.auth {
            req = req.header("Authorization", a);
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| Failure::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(Failure::Transport(format!("HTTP status {status}")));
        }
        let parsed: RerankResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Failure::Invalid(format!("bad response body: {e}")))?;
        permutation_of(window, &parsed.ordering).map_err(|e| Failure::Invalid(e.to_string()))?;
        Ok(Batch {
            ordering: parsed.ordering,
        })
    }
}

impl ListwiseRanker for RemoteRanker {
    /// Tries up to `retries + 1` times with exponential backoff. If the last
    /// failure was an invalid response the window keeps its input order and
    /// the event is logged; transport failures are returned as errors.
    fn rank(&self, window: &Window<'_>) -> Result<Batch, RankError> {
        let body = RerankRequest {
            qid: &window.query.qid,
            query: &window.query.text,
            candidates: window
                .docs
                .iter()
                .map(|d| Candidate {
                    docno: d.docno,
                    text: truncate_tokens(d.text, self.config.max_doc_tokens),
                })
                .collect(),
        };
        let attempts = self.config.retries + 1;
        let mut backoff = Duration::from_millis(self.config.backoff_ms);
        let mut last = Failure::Transport("no attempt made".into());
        for n in 0..attempts {
            match self.attempt(&body, window) {
                Ok(batch) => return Ok(batch),
                Err(f) => {
                    let msg = match &f {
                        Failure::Transport(m) | Failure::Invalid(m) => m,
                    };
                    log::debug!(
                        "rerank attempt {} for qid {} failed: {msg}",
                        n + 1,
                        window.query.qid
                    );
                    last = f;
                }
            }
            if n + 1 < attempts {
                std::thread::sleep(backoff);
                backoff *= 2;
            }
        }
        match last {
            Failure::Invalid(msg) => {
                self.degradations.fetch_add(1, Ordering::Relaxed);
                log::warn!(
                    "degraded: keeping input order for a {}-doc window of qid {} ({msg})",
                    window.len(),
                    window.query.qid
                );
                Ok(Batch::from_window(window, 0..window.len()))
            }
            Failure::Transport(last) => Err(RankError::Transport { attempts, last }),
        }
    }

    fn name(&self) -> &str {
        "remote"
    }
}
