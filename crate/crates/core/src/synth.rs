//! Synthetic collections that obey the clustering hypothesis.
//!
//! Every cluster owns a private vocabulary and an embedding centroid. Each
//! query targets one cluster and a set of relevant documents inside it. A
//! `retrieval_gap` fraction of those are *hidden*: they share no term with
//! the query, so no lexical first stage can find them, but they sit next to
//! the visible relevant documents in embedding space and share a few topic
//! terms with them. Only a corpus graph (or feedback) can reach them.
//!
//! Term families (all single tokens under the tokenizer):
//!
//! | family        | form         | appears in                                  |
//! |---------------|--------------|---------------------------------------------|
//! | cluster       | `c{c}v{i}`   | documents of cluster `c`                    |
//! | shared        | `s{i}`       | any document                                |
//! | query keyword | `q{q}k{i}`   | query `q` and its visible relevant docs     |
//! | topic         | `q{q}t{i}`   | all relevant docs of `q`, never the query   |
//!
//! Randomness comes from one `ChaCha20Rng::seed_from_u64(seed)` stream,
//! consumed in a fixed order, so a spec reproduces its output byte for byte.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{write_qrels, write_queries, CorpusStore, Document, QrelEntry, Query};
use crate::dense::{EmbeddingFile, EmbeddingHeader};

/// Identifies the generator algorithm in `spec.json`.
pub const GENERATOR: &str = "slidegar-synth/1 chacha20 (rand_chacha 0.3, seed_from_u64)";

const QUERY_KEYWORDS: usize = 2;
const QUERY_CLUSTER_TERMS: usize = 2;
const TOPIC_TERMS: usize = 3;
const SHARED_TOKENS: usize = 4;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    Invalid(String),
    #[error("cluster vocabulary exhausted: documents need {needed} distinct cluster terms but only {available} are available")]
    VocabExhausted { needed: usize, available: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_clusters: usize,
    pub docs_per_cluster: usize,
    pub vocab_per_cluster: usize,
    pub shared_vocab: usize,
    pub dim: usize,
    pub n_queries: usize,
    pub relevant_per_query: usize,
    /// Fraction of each query's relevant documents sharing no query term.
    pub retrieval_gap: f64,
    pub seed: u64,
    /// Distinct cluster terms per document.
    pub doc_length: usize,
    /// Approximate norm of the per-document embedding noise.
    pub noise: f64,
    /// Length of the offset that pulls a query's relevant documents together.
    pub topic_weight: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_clusters: 20,
            docs_per_cluster: 25,
            vocab_per_cluster: 40,
            shared_vocab: 10,
            dim: 32,
            n_queries: 20,
            relevant_per_query: 10,
            retrieval_gap: 0.5,
            seed: 7,
            doc_length: 20,
            noise: 0.3,
            topic_weight: 0.3,
        }
    }
}

impl SynthSpec {
    pub fn hidden_per_query(&self) -> usize {
        (self.retrieval_gap * self.relevant_per_query as f64 + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let counts = [
            ("n_clusters", self.n_clusters),
            ("docs_per_cluster", self.docs_per_cluster),
            ("vocab_per_cluster", self.vocab_per_cluster),
            ("shared_vocab", self.shared_vocab),
            ("dim", self.dim),
            ("n_queries", self.n_queries),
            ("relevant_per_query", self.relevant_per_query),
            ("doc_length", self.doc_length),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(SynthError::Invalid(format!("{name} must be at least 1")));
        }
        if !(0.0..1.0).contains(&self.retrieval_gap) {
            return Err(SynthError::Invalid("retrieval_gap must be in [0, 1)".into()));
        }
        for (name, v) in [("noise", self.noise), ("topic_weight", self.topic_weight)] {
            if !v.is_finite() || v < 0.0 {
                return Err(SynthError::Invalid(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        let per_cluster = self.n_queries.div_ceil(self.n_clusters);
        if per_cluster * self.relevant_per_query > self.docs_per_cluster {
            return Err(SynthError::Invalid(format!(
                "{per_cluster} queries per cluster x {} relevant docs exceed {} docs per cluster",
                self.relevant_per_query, self.docs_per_cluster
            )));
        }
        // hidden documents must draw all their cluster terms outside the query's
        let available = self.vocab_per_cluster.saturating_sub(QUERY_CLUSTER_TERMS);
        if self.doc_length > available {
            return Err(SynthError::VocabExhausted {
                needed: self.doc_length,
                available,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCollection {
    pub spec: SynthSpec,
    pub documents: Vec<Document>,
    pub queries: Vec<Query>,
    pub qrels: Vec<QrelEntry>,
    pub doc_embeddings: EmbeddingFile,
    pub query_embeddings: EmbeddingFile,
    /// Hidden relevant docnos per qid.
    pub hidden: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Provenance {
    generator: String,
    spec: SynthSpec,
    files: Vec<String>,
}

pub const FILES: [&str; 6] = [
    "corpus.tsv",
    "queries.tsv",
    "qrels.txt",
    "doc_embeddings.bin",
    "query_embeddings.bin",
    "hidden.tsv",
];

impl SynthCollection {
    pub fn store(&self) -> CorpusStore {
        CorpusStore::from_documents(self.documents.clone()).expect("generated docnos are unique")
    }

    /// Writes the collection plus a `spec.json` provenance record.
    pub fn write_dir(&self, dir: &Path) -> Result<(), SynthError> {
        std::fs::create_dir_all(dir)?;
        let create = |name: &str| File::create(dir.join(name)).map(BufWriter::new);

        let mut out = create("corpus.tsv")?;
        for d in &self.documents {
            writeln!(out, "{}\t{}", d.docno, d.text)?;
        }
        out.flush()?;

        let mut out = create("queries.tsv")?;
        write_queries(&self.queries, &mut out)?;
        out.flush()?;

        let mut out = create("qrels.txt")?;
        write_qrels(&self.qrels, &mut out)?;
        out.flush()?;

        for (name, file) in [
            ("doc_embeddings.bin", &self.doc_embeddings),
            ("query_embeddings.bin", &self.query_embeddings),
        ] {
            let mut out = create(name)?;
            file.write(&mut out)
                .map_err(|e| SynthError::Invalid(format!("{name}: {e}")))?;
            out.flush()?;
        }

        let mut out = create("hidden.tsv")?;
        for (qid, docs) in &self.hidden {
            for d in docs {
                writeln!(out, "{qid}\t{d}")?;
            }
        }
        out.flush()?;

        let provenance = Provenance {
            generator: GENERATOR.to_string(),
            spec: self.spec.clone(),
            files: FILES.iter().map(|s| s.to_string()).collect(),
        };
        let mut out = create("spec.json")?;
        serde_json::to_writer_pretty(&mut out, &provenance)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Role {
    Background,
    Visible(usize),
    Hidden(usize),
}

struct QueryPlan {
    cluster: usize,
    cluster_terms: Vec<usize>,
    shared_term: usize,
    topic: Vec<f64>,
}

fn random_unit(rng: &mut ChaCha20Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn embed(rng: &mut ChaCha20Rng, centroid: &[f64], topic: Option<(&[f64], f64)>, noise: f64) -> Vec<f32> {
    // uniform [-a, a] per component has expected squared norm dim * a^2 / 3
    let a = noise * (3.0 / centroid.len() as f64).sqrt();
    centroid
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let t = topic.map_or(0.0, |(u, w)| u[i] * w);
            (c + t + (rng.gen::<f64>() * 2.0 - 1.0) * a) as f32
        })
        .collect()
}

fn cluster_term(c: usize, i: usize) -> String {
    format!("c{c}v{i}")
}

/// Builds a collection from `spec`.
pub fn generate(spec: &SynthSpec) -> Result<SynthCollection, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);

    let centroids: Vec<Vec<f64>> = (0..spec.n_clusters)
        .map(|_| random_unit(&mut rng, spec.dim))
        .collect();

    // relevant slots are drawn from a shuffled order of each cluster's docs
    let mut slot_order: Vec<Vec<usize>> = (0..spec.n_clusters)
        .map(|_| {
            let mut v: Vec<usize> = (0..spec.docs_per_cluster).collect();
            v.shuffle(&mut rng);
            v
        })
        .collect();
    let mut roles = vec![vec![Role::Background; spec.docs_per_cluster]; spec.n_clusters];
    let hidden_n = spec.hidden_per_query();

    let mut plans = Vec::with_capacity(spec.n_queries);
    for q in 0..spec.n_queries {
        let cluster = q % spec.n_clusters;
        let mut cluster_terms: Vec<usize> = rand::seq::index::sample(
            &mut rng,
            spec.vocab_per_cluster,
            QUERY_CLUSTER_TERMS.min(spec.vocab_per_cluster),
        )
        .into_vec();
        cluster_terms.sort_unstable();
        let shared_term = rng.gen_range(0..spec.shared_vocab);
        let topic = random_unit(&mut rng, spec.dim);
        let slots: Vec<usize> = slot_order[cluster].drain(..spec.relevant_per_query).collect();
        for (j, &s) in slots.iter().enumerate() {
            roles[cluster][s] = if j < spec.relevant_per_query - hidden_n {
                Role::Visible(q)
            } else {
                Role::Hidden(q)
            };
        }
        plans.push(QueryPlan {
            cluster,
            cluster_terms,
            shared_term,
            topic,
        });
    }

    let docno = |c: usize, i: usize| format!("doc{:05}", c * spec.docs_per_cluster + i);
    let mut documents = Vec::with_capacity(spec.n_clusters * spec.docs_per_cluster);
    let mut doc_vectors = Vec::with_capacity(documents.capacity());
    let mut hidden: BTreeMap<String, Vec<String>> = BTreeMap::new();

    for c in 0..spec.n_clusters {
        for (i, &role) in roles[c].iter().enumerate() {
            let plan = match role {
                Role::Visible(q) | Role::Hidden(q) => Some((q, &plans[q])),
                Role::Background => None,
            };
            let mut tokens: Vec<String> = Vec::new();

            // cluster terms: distinct, query terms forced in or kept out
            let banned: HashSet<usize> = match role {
                Role::Hidden(_) | Role::Visible(_) => plan.unwrap().1.cluster_terms.iter().copied().collect(),
                Role::Background => HashSet::new(),
            };
            let mut pool: Vec<usize> = (0..spec.vocab_per_cluster)
                .filter(|t| !banned.contains(t))
                .collect();
            let mut need = spec.doc_length;
            if let Role::Visible(_) = role {
                let forced = &plan.unwrap().1.cluster_terms;
                tokens.extend(forced.iter().map(|&t| cluster_term(c, t)));
                need = need.saturating_sub(forced.len());
            }
            let (picked, _) = pool.partial_shuffle(&mut rng, need);
            tokens.extend(picked.iter().map(|&t| cluster_term(c, t)));

            let shared_pool: Vec<usize> = match role {
                Role::Hidden(_) => (0..spec.shared_vocab)
                    .filter(|&s| s != plan.unwrap().1.shared_term)
                    .collect(),
                _ => (0..spec.shared_vocab).collect(),
            };
            if !shared_pool.is_empty() {
                for _ in 0..SHARED_TOKENS {
                    tokens.push(format!("s{}", shared_pool[rng.gen_range(0..shared_pool.len())]));
                }
            }

            if let Some((q, _)) = plan {
                if let Role::Visible(_) = role {
                    for k in 0..QUERY_KEYWORDS {
                        tokens.push(format!("q{q}k{k}"));
                        tokens.push(format!("q{q}k{k}"));
                    }
                }
                tokens.extend((0..TOPIC_TERMS).map(|t| format!("q{q}t{t}")));
            }
            tokens.shuffle(&mut rng);

            let topic = plan.map(|(_, p)| (p.topic.as_slice(), spec.topic_weight));
            doc_vectors.push((docno(c, i), embed(&mut rng, &centroids[c], topic, spec.noise)));
            if let Role::Hidden(q) = role {
                hidden.entry(format!("q{q}")).or_default().push(docno(c, i));
            }
            documents.push(Document {
                docno: docno(c, i),
                text: tokens.join(" "),
            });
        }
    }

    let mut queries = Vec::with_capacity(spec.n_queries);
    let mut query_vectors = Vec::with_capacity(spec.n_queries);
    let mut qrels = Vec::new();
    for (q, plan) in plans.iter().enumerate() {
        let qid = format!("q{q}");
        let mut terms: Vec<String> = (0..QUERY_KEYWORDS).map(|k| format!("q{q}k{k}")).collect();
        terms.extend(plan.cluster_terms.iter().map(|&t| cluster_term(plan.cluster, t)));
        terms.push(format!("s{}", plan.shared_term));
        queries.push(Query::new(qid.clone(), terms.join(" ")));
        query_vectors.push((
            qid.clone(),
            embed(
                &mut rng,
                &centroids[plan.cluster],
                Some((&plan.topic, spec.topic_weight)),
                spec.noise,
            ),
        ));
        for (i, role) in roles[plan.cluster].iter().enumerate() {
            let grade = match role {
                Role::Visible(r) | Role::Hidden(r) if *r == q => 2,
                _ => 1,
            };
            qrels.push(QrelEntry {
                qid: qid.clone(),
                docno: docno(plan.cluster, i),
                grade,
            });
        }
    }

    let header = |count| EmbeddingHeader {
        dim: spec.dim,
        count,
        normalized: false,
    };
    Ok(SynthCollection {
        spec: spec.clone(),
        doc_embeddings: EmbeddingFile {
            header: header(doc_vectors.len()),
            records: doc_vectors,
        },
        query_embeddings: EmbeddingFile {
            header: header(query_vectors.len()),
            records: query_vectors,
        },
        documents,
        queries,
        qrels,
        hidden,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexical::tokenize;

    fn small() -> SynthSpec {
        SynthSpec {
            n_clusters: 4,
            docs_per_cluster: 12,
            n_queries: 6,
            relevant_per_query: 4,
            ..Default::default()
        }
    }

    #[test]
    fn shapes_and_grades() {
        let spec = small();
        let col = generate(&spec).unwrap();
        assert_eq!(col.documents.len(), 48);
        assert_eq!(col.queries.len(), 6);
        assert_eq!(col.doc_embeddings.records.len(), 48);
        for q in &col.queries {
            let twos = col
                .qrels
                .iter()
                .filter(|e| e.qid == q.qid && e.grade == 2)
                .count();
            let ones = col
                .qrels
                .iter()
                .filter(|e| e.qid == q.qid && e.grade == 1)
                .count();
            assert_eq!(twos, 4);
            assert_eq!(ones, 8);
            assert_eq!(col.hidden[&q.qid].len(), 2);
        }
    }

    #[test]
    fn hidden_docs_share_no_query_term() {
        let col = generate(&SynthSpec::default()).unwrap();
        let text: BTreeMap<&str, &str> = col
            .documents
            .iter()
            .map(|d| (d.docno.as_str(), d.text.as_str()))
            .collect();
        for q in &col.queries {
            let qt: HashSet<String> = tokenize(&q.text).into_iter().collect();
            let hidden = &col.hidden[&q.qid];
            assert_eq!(hidden.len(), 5);
            for h in hidden {
                assert!(
                    tokenize(text[h.as_str()]).iter().all(|t| !qt.contains(t)),
                    "{h} leaks into {}",
                    q.qid
                );
            }
            let visible = col
                .qrels
                .iter()
                .filter(|e| e.qid == q.qid && e.grade == 2 && !hidden.contains(&e.docno));
            for v in visible {
                assert!(tokenize(text[v.docno.as_str()]).iter().any(|t| qt.contains(t)));
            }
        }
    }

    #[test]
    fn deterministic() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate(&SynthSpec { seed: 8, ..small() }).unwrap();
        assert_ne!(a.documents, c.documents);
    }

    #[test]
    fn invalid_specs() {
        assert!(matches!(
            generate(&SynthSpec {
                vocab_per_cluster: 10,
                ..Default::default()
            }),
            Err(SynthError::VocabExhausted {
                needed: 20,
                available: 8
            })
        ));
        assert!(generate(&SynthSpec {
            retrieval_gap: 1.0,
            ..Default::default()
        })
        .is_err());
        assert!(generate(&SynthSpec {
            dim: 0,
            ..Default::default()
        })
        .is_err());
        assert!(generate(&SynthSpec {
            n_queries: 60,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn gap_arithmetic() {
        let s = |gap| SynthSpec {
            retrieval_gap: gap,
            relevant_per_query: 100,
            ..Default::default()
        };
        assert_eq!(s(0.29).hidden_per_query(), 29);
        assert_eq!(s(0.0).hidden_per_query(), 0);
        assert_eq!(SynthSpec::default().hidden_per_query(), 5);
    }
}
