//! The JSON pipeline configuration consumed by `run` and `sweep-k`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slidegar::lexical::Rm3Params;
use slidegar::rankers::RemoteConfig;
use slidegar::rerank::RerankConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Retriever {
    #[default]
    Bm25,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Baseline,
    #[default]
    Slidegar,
    SlidegarRm3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankerKind {
    #[default]
    Oracle,
    NoisyOracle,
    Identity,
    Remote,
}

/// Every field has a default except the three paths checked by
/// [`PipelineConfig::validate`]. Relative paths resolve against the directory
/// holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// `docno<TAB>text` or JSON-lines corpus.
    pub corpus: PathBuf,
    /// Drop documents whose normalized text repeats. Must match the flag the
    /// index and graph were built with.
    pub dedup: bool,
    /// Persisted index from `build-index`; built in memory when absent.
    pub index: Option<PathBuf>,
    pub queries: PathBuf,
    pub qrels: Option<PathBuf>,
    pub retriever: Retriever,
    /// Document embeddings, for the dense retriever.
    pub embeddings: Option<PathBuf>,
    /// Query embeddings keyed by qid, for the dense retriever.
    pub query_embeddings: Option<PathBuf>,
    pub strategy: StrategyKind,
    pub ranker: RankerKind,
    pub graph: Option<PathBuf>,
    pub w: usize,
    pub b: usize,
    pub c: usize,
    pub truncate_k: usize,
    pub accumulate_frontier: bool,
    pub rm3: Rm3Params,
    /// Swap probability of the noisy oracle.
    pub noise: f64,
    pub seed: u64,
    pub remote: RemoteConfig,
    /// Output run file.
    pub run: PathBuf,
    pub telemetry: Option<PathBuf>,
    pub tag: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let r = RerankConfig::default();
        Self {
            corpus: PathBuf::new(),
            dedup: false,
            index: None,
            queries: PathBuf::new(),
            qrels: None,
            retriever: Retriever::Bm25,
            embeddings: None,
            query_embeddings: None,
            strategy: StrategyKind::Slidegar,
            ranker: RankerKind::Oracle,
            graph: None,
            w: r.window,
            b: r.step,
            c: r.budget,
            truncate_k: r.truncate_k,
            accumulate_frontier: r.accumulate_frontier,
            rm3: Rm3Params::default(),
            noise: 0.1,
            seed: 0,
            remote: RemoteConfig::default(),
            run: PathBuf::new(),
            telemetry: None,
            tag: "slidegar".into(),
        }
    }
}

impl PipelineConfig {
    /// Parses config text read from `path`.
    pub fn parse(text: &str, path: &Path) -> Result<Self, String> {
        let mut cfg: Self = serde_json::from_str(text).map_err(|e| format!("{}: {e}", path.display()))?;
        let dir = path
            .parent()
            .filter(|d| !d.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        cfg.resolve(dir);
        Ok(cfg)
    }

    /// Makes every path absolute against `base`, so the echoed config can be
    /// re-run from anywhere.
    pub fn resolve(&mut self, base: &Path) {
        let base = std::path::absolute(base).unwrap_or_else(|_| base.to_path_buf());
        let fix = |p: &mut PathBuf| {
            if !p.as_os_str().is_empty() && p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.corpus, &mut self.queries, &mut self.run] {
            fix(p);
        }
        for p in [
            &mut self.index,
            &mut self.qrels,
            &mut self.embeddings,
            &mut self.query_embeddings,
            &mut self.graph,
            &mut self.telemetry,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn rerank(&self) -> RerankConfig {
        RerankConfig {
            window: self.w,
            step: self.b,
            budget: self.c,
            truncate_k: self.truncate_k,
            accumulate_frontier: self.accumulate_frontier,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [
            ("corpus", &self.corpus),
            ("queries", &self.queries),
            ("run", &self.run),
        ] {
            if p.as_os_str().is_empty() {
                return Err(format!("missing required field `{name}`"));
            }
        }
        self.rerank().validate().map_err(|e| e.to_string())?;
        if self.strategy == StrategyKind::Slidegar && self.graph.is_none() {
            return Err("strategy slidegar needs `graph`".into());
        }
        if self.strategy == StrategyKind::SlidegarRm3 {
            self.rm3.validate().map_err(|e| e.to_string())?;
        }
        if self.retriever == Retriever::Dense
            && (self.embeddings.is_none() || self.query_embeddings.is_none())
        {
            return Err("dense retriever needs `embeddings` and `query_embeddings`".into());
        }
        match self.ranker {
            RankerKind::Oracle | RankerKind::NoisyOracle if self.qrels.is_none() => {
                Err("oracle rankers need `qrels`".into())
            }
            RankerKind::NoisyOracle if !(0.0..=1.0).contains(&self.noise) => {
                Err(format!("noise {} outside [0, 1]", self.noise))
            }
            RankerKind::Remote if self.remote.endpoint.is_empty() => {
                Err("remote ranker needs `remote.endpoint`".into())
            }
            _ => Ok(()),
        }
    }
}
