//! On-disk layout of an [`InvertedIndex`]:
//!
//! - `terms.dict`: one `term<TAB>byte offset<TAB>posting count` line per term, sorted by term
//! - `postings.bin`: per term, `(doc id delta, tf)` pairs as little-endian `u32`
//! - `doclens.bin`: one little-endian `u32` token count per document
//! - `meta.json`: format version, document count and average length
//! - `docnos.txt`: docnos in id order, checked against the store on load

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::index::{Bm25Params, InvertedIndex, Posting};
use super::LexicalError;
use crate::corpus::{CorpusStore, DocId};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IndexMeta {
    pub version: u32,
    pub doc_count: usize,
    pub avgdl: f64,
    pub terms: usize,
    pub k1: f64,
    pub b: f64,
}

fn format_err(msg: impl Into<String>) -> LexicalError {
    LexicalError::Format(msg.into())
}

impl InvertedIndex {
    pub fn write_dir(&self, dir: &Path, store: &CorpusStore) -> Result<(), LexicalError> {
        fs::create_dir_all(dir)?;
        let mut dict = BufWriter::new(File::create(dir.join("terms.dict"))?);
        let mut post = BufWriter::new(File::create(dir.join("postings.bin"))?);
        let mut offset = 0u64;
        for (term, plist) in self.terms.iter().zip(&self.postings) {
            writeln!(dict, "{term}\t{offset}\t{}", plist.len())?;
            let mut prev = 0u32;
            for p in plist {
                post.write_all(&(p.doc.0 - prev).to_le_bytes())?;
                post.write_all(&p.tf.to_le_bytes())?;
                prev = p.doc.0;
            }
            offset += plist.len() as u64 * 8;
        }
        dict.flush()?;
        post.flush()?;

        let mut lens = BufWriter::new(File::create(dir.join("doclens.bin"))?);
        for l in &self.doc_lengths {
            lens.write_all(&l.to_le_bytes())?;
        }
        lens.flush()?;

        let meta = IndexMeta {
            version: FORMAT_VERSION,
            doc_count: self.doc_count(),
            avgdl: self.avg_doc_length,
            terms: self.terms.len(),
            k1: self.params.k1,
            b: self.params.b,
        };
        fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;

        let mut docnos = BufWriter::new(File::create(dir.join("docnos.txt"))?);
        for d in store.docnos() {
            writeln!(docnos, "{d}")?;
        }
        docnos.flush()?;
        Ok(())
    }

    /// Loads an index and checks that its docno list matches `store`.
    pub fn read_dir(dir: &Path, store: &CorpusStore) -> Result<Self, LexicalError> {
        let meta: IndexMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
        if meta.version != FORMAT_VERSION {
            return Err(format_err(format!("unsupported index version {}", meta.version)));
        }
        if meta.doc_count != store.len() {
            return Err(format_err(format!(
                "index has {} documents, store has {}",
                meta.doc_count,
                store.len()
            )));
        }
        let docnos = BufReader::new(File::open(dir.join("docnos.txt"))?);
        for (i, line) in docnos.lines().enumerate() {
            let line = line?;
            if store.get(DocId(i as u32)).map(|d| d.docno.as_str()) != Some(line.as_str()) {
                return Err(format_err(format!("docno mismatch at id {i}: {line:?}")));
            }
        }

        let mut raw = Vec::new();
        File::open(dir.join("postings.bin"))?.read_to_end(&mut raw)?;
        let words = le_u32s(&raw, "postings.bin")?;

        let mut terms = Vec::with_capacity(meta.terms);
        let mut postings = Vec::with_capacity(meta.terms);
        for (lineno, line) in BufReader::new(File::open(dir.join("terms.dict"))?)
            .lines()
            .enumerate()
        {
            let line = line?;
            let mut parts = line.split('\t');
            let (Some(term), Some(off), Some(count), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(format_err(format!("terms.dict line {}: bad record", lineno + 1)));
            };
            let off: usize = off
                .parse()
                .map_err(|_| format_err(format!("terms.dict line {}: bad offset", lineno + 1)))?;
            let count: usize = count
                .parse()
                .map_err(|_| format_err(format!("terms.dict line {}: bad count", lineno + 1)))?;
            if terms.last().is_some_and(|prev: &String| prev.as_str() >= term) {
                return Err(format_err(format!("terms.dict line {}: not sorted", lineno + 1)));
            }
            let start = off / 4;
            let slice = words
                .get(start..start + 2 * count)
                .filter(|_| off.is_multiple_of(8))
                .ok_or_else(|| format_err(format!("postings for {term:?} out of bounds")))?;
            let mut plist = Vec::with_capacity(count);
            let mut doc = 0u32;
            for (i, pair) in slice.chunks_exact(2).enumerate() {
                doc = doc
                    .checked_add(pair[0])
                    .filter(|&d| (i == 0 || pair[0] > 0) && (d as usize) < store.len())
                    .ok_or_else(|| format_err(format!("bad doc id in postings of {term:?}")))?;
                plist.push(Posting {
                    doc: DocId(doc),
                    tf: pair[1],
                });
            }
            terms.push(term.to_string());
            postings.push(plist);
        }
        if terms.len() != meta.terms {
            return Err(format_err("term count does not match meta.json"));
        }

        let mut raw = Vec::new();
        File::open(dir.join("doclens.bin"))?.read_to_end(&mut raw)?;
        let doc_lengths = le_u32s(&raw, "doclens.bin")?;
        if doc_lengths.len() != meta.doc_count {
            return Err(format_err("doclens.bin length does not match meta.json"));
        }

        let mut forward: Vec<Vec<(u32, u32)>> = vec![Vec::new(); meta.doc_count];
        for (tid, plist) in postings.iter().enumerate() {
            for p in plist {
                forward[p.doc.index()].push((tid as u32, p.tf));
            }
        }
        let term_ids: HashMap<String, u32> = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();

        Ok(Self {
            terms,
            term_ids,
            postings,
            doc_lengths,
            avg_doc_length: meta.avgdl,
            forward,
            params: Bm25Params {
                k1: meta.k1,
                b: meta.b,
            },
        })
    }
}

fn le_u32s(raw: &[u8], what: &str) -> Result<Vec<u32>, LexicalError> {
    if !raw.len().is_multiple_of(4) {
        return Err(format_err(format!("{what}: truncated")));
    }
    Ok(raw
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}
