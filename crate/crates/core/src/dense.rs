//! Precomputed embeddings and exhaustive inner-product retrieval.
//!
//! File layout: one JSON header line `{"dim": D, "count": N, "normalized": bool}`
//! followed by `N` binary records of `u32` docno length, docno bytes and `D`
//! little-endian `f32` components.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusStore, DocId};
use crate::ranking::{Ranking, Scored};

#[derive(Debug, thiserror::Error)]
pub enum DenseError {
    #[error("bad embedding header: {0}")]
    Header(String),
    #[error("record {index}: {reason}")]
    Record { index: usize, reason: String },
    #[error("no embedding for docno {0:?}")]
    MissingDoc(String),
    #[error("vector has dimension {got}, expected {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingHeader {
    pub dim: usize,
    pub count: usize,
    pub normalized: bool,
}

/// Keyed vectors as they appear in an embedding file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub header: EmbeddingHeader,
    pub records: Vec<(String, Vec<f32>)>,
}

impl EmbeddingFile {
    pub fn read<R: BufRead>(mut input: R) -> Result<Self, DenseError> {
        let mut line = String::new();
        input.read_line(&mut line)?;
        let header: EmbeddingHeader =
            serde_json::from_str(line.trim_end()).map_err(|e| DenseError::Header(e.to_string()))?;
        if header.dim == 0 {
            return Err(DenseError::Header("dim must be positive".into()));
        }
        let mut records = Vec::with_capacity(header.count);
        let mut word = [0u8; 4];
        let mut vec_bytes = vec![0u8; header.dim * 4];
        for index in 0..header.count {
            let truncated = |e: std::io::Error| DenseError::Record {
                index,
                reason: format!("truncated: {e}"),
            };
            input.read_exact(&mut word).map_err(truncated)?;
            let len = u32::from_le_bytes(word) as usize;
            let mut name = vec![0u8; len];
            input.read_exact(&mut name).map_err(truncated)?;
            let docno = String::from_utf8(name).map_err(|_| DenseError::Record {
                index,
                reason: "docno is not UTF-8".into(),
            })?;
            input.read_exact(&mut vec_bytes).map_err(truncated)?;
            let v: Vec<f32> = vec_bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if let Some(pos) = v.iter().position(|x| !x.is_finite()) {
                return Err(DenseError::Record {
                    index,
                    reason: format!("non-finite component {pos} for {docno:?}"),
                });
            }
            records.push((docno, v));
        }
        let mut rest = [0u8; 1];
        if input.read(&mut rest)? != 0 {
            return Err(DenseError::Header(format!(
                "trailing data after {} records",
                header.count
            )));
        }
        Ok(Self { header, records })
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<(), DenseError> {
        let h = EmbeddingHeader {
            count: self.records.len(),
            ..self.header
        };
        serde_json::to_writer(&mut out, &h).map_err(|e| DenseError::Header(e.to_string()))?;
        out.write_all(b"\n")?;
        for (index, (key, v)) in self.records.iter().enumerate() {
            if v.len() != h.dim {
                return Err(DenseError::Record {
                    index,
                    reason: format!("dimension {} != {}", v.len(), h.dim),
                });
            }
            out.write_all(&(key.len() as u32).to_le_bytes())?;
            out.write_all(key.as_bytes())?;
            for x in v {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Vectors keyed by record name (used for query embeddings).
    pub fn into_map(self) -> HashMap<String, Vec<f32>> {
        self.records.into_iter().collect()
    }
}

/// Dense vectors for every document of a store, in [`DocId`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    normalized: bool,
    data: Vec<f32>,
}

pub fn l2_normalize(v: &mut [f32]) {
    let norm = v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x = (*x as f64 / norm) as f32);
    }
}

/// Inner product accumulated in `f64`.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
}

impl EmbeddingTable {
    /// Aligns file records with the store. Every store document needs exactly
    /// one vector; records naming unknown docnos are rejected.
    pub fn from_file(file: EmbeddingFile, store: &CorpusStore, normalize: bool) -> Result<Self, DenseError> {
        let dim = file.header.dim;
        let mut data = vec![0f32; store.len() * dim];
        let mut filled = vec![false; store.len()];
        for (index, (docno, mut v)) in file.records.into_iter().enumerate() {
            if v.len() != dim {
                return Err(DenseError::DimMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            let id = store.id_of(&docno).ok_or_else(|| DenseError::Record {
                index,
                reason: format!("docno {docno:?} not in store"),
            })?;
            if std::mem::replace(&mut filled[id.index()], true) {
                return Err(DenseError::Record {
                    index,
                    reason: format!("duplicate vector for {docno:?}"),
                });
            }
            if normalize {
                l2_normalize(&mut v);
            }
            data[id.index() * dim..(id.index() + 1) * dim].copy_from_slice(&v);
        }
        if let Some(missing) = filled.iter().position(|f| !f) {
            return Err(DenseError::MissingDoc(
                store.docno(DocId(missing as u32)).to_string(),
            ));
        }
        Ok(Self {
            dim,
            normalized: normalize || file.header.normalized,
            data,
        })
    }

    pub fn from_vectors(vectors: Vec<Vec<f32>>) -> Result<Self, DenseError> {
        let dim = vectors.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(DenseError::Header("empty table".into()));
        }
        let mut data = Vec::with_capacity(vectors.len() * dim);
        for (index, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(DenseError::DimMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(DenseError::Record {
                    index,
                    reason: "non-finite component".into(),
                });
            }
            data.extend_from_slice(v);
        }
        Ok(Self {
            dim,
            normalized: false,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn vector(&self, id: DocId) -> &[f32] {
        &self.data[id.index() * self.dim..(id.index() + 1) * self.dim]
    }

    pub fn to_file(&self, store: &CorpusStore) -> EmbeddingFile {
        EmbeddingFile {
            header: EmbeddingHeader {
                dim: self.dim,
                count: self.len(),
                normalized: self.normalized,
            },
            records: store
                .ids()
                .map(|id| (store.docno(id).to_string(), self.vector(id).to_vec()))
                .collect(),
        }
    }

    /// Exact top-`k` by inner product, ties by id. Documents in `exclude` are
    /// skipped.
    pub fn top_k_excluding(
        &self,
        query: &[f32],
        k: usize,
        exclude: Option<&HashSet<DocId>>,
    ) -> Result<Ranking, DenseError> {
        if k == 0 {
            return Err(DenseError::ZeroK);
        }
        if query.len() != self.dim {
            return Err(DenseError::DimMismatch {
                expected: self.dim,
                got: query.len(),
            });
        }
        let candidates = (0..self.len() as u32)
            .map(DocId)
            .filter(|d| !exclude.is_some_and(|e| e.contains(d)))
            .map(|d| Scored::new(d, dot(query, self.vector(d))))
            .collect();
        Ok(Ranking::top_k(candidates, k))
    }
}

pub fn dense_retrieve(table: &EmbeddingTable, query: &[f32], k: usize) -> Result<Ranking, DenseError> {
    table.top_k_excluding(query, k, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn store(n: usize) -> CorpusStore {
        CorpusStore::from_documents(
            (0..n)
                .map(|i| Document {
                    docno: format!("d{i}"),
                    text: format!("text {i}"),
                })
                .collect(),
        )
        .unwrap()
    }

    fn file(records: Vec<(&str, Vec<f32>)>, dim: usize) -> EmbeddingFile {
        EmbeddingFile {
            header: EmbeddingHeader {
                dim,
                count: records.len(),
                normalized: false,
            },
            records: records.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }

    fn roundtrip(f: &EmbeddingFile) -> Result<EmbeddingFile, DenseError> {
        let mut buf = Vec::new();
        f.write(&mut buf).unwrap();
        EmbeddingFile::read(&buf[..])
    }

    #[test]
    fn well_formed_load() {
        let f = file(
            vec![
                ("d2", vec![0.0, 0.0, 1.0, 0.0]),
                ("d0", vec![1.0, 0.0, 0.0, 0.0]),
                ("d1", vec![0.0, 1.0, 0.0, 0.0]),
            ],
            4,
        );
        let back = roundtrip(&f).unwrap();
        assert_eq!(back, f);
        let t = EmbeddingTable::from_file(back, &store(3), false).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.vector(DocId(2)), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn nan_rejected_with_index() {
        let f = file(vec![("d0", vec![1.0, 0.0]), ("d1", vec![f32::NAN, 0.0])], 2);
        match roundtrip(&f) {
            Err(DenseError::Record { index: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_doc_named() {
        let f = file(vec![("d0", vec![1.0]), ("d2", vec![2.0])], 1);
        match EmbeddingTable::from_file(f, &store(3), false) {
            Err(DenseError::MissingDoc(d)) => assert_eq!(d, "d1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_file() {
        let f = file(vec![("d0", vec![1.0, 2.0])], 2);
        let mut buf = Vec::new();
        f.write(&mut buf).unwrap();
        buf.pop();
        assert!(matches!(
            EmbeddingFile::read(&buf[..]),
            Err(DenseError::Record { index: 0, .. })
        ));
    }

    #[test]
    fn normalize_flag() {
        let f = file(vec![("d0", vec![3.0, 4.0])], 2);
        let t = EmbeddingTable::from_file(f, &store(1), true).unwrap();
        assert!(t.normalized());
        assert!((t.vector(DocId(0))[0] - 0.6).abs() < 1e-6);
    }

    #[test]
    fn orthogonal_retrieval() {
        let t = EmbeddingTable::from_vectors(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(dense_retrieve(&t, &[1.0, 0.0], 1).unwrap().ids(), vec![DocId(0)]);
        let all = dense_retrieve(&t, &[0.2, 0.9], 10).unwrap();
        assert_eq!(all.ids(), vec![DocId(1), DocId(0)]);
        assert!(matches!(
            dense_retrieve(&t, &[1.0, 0.0], 0),
            Err(DenseError::ZeroK)
        ));
        assert!(matches!(
            dense_retrieve(&t, &[1.0], 1),
            Err(DenseError::DimMismatch { .. })
        ));
    }
}
