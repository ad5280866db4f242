//! Six-column TREC run files: `qid Q0 docno rank score tag`.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use super::EvalError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub docno: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunFile {
    pub tag: String,
    /// Per-qid rankings, best first.
    pub runs: BTreeMap<String, Vec<RunEntry>>,
}

impl RunFile {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            runs: BTreeMap::new(),
        }
    }

    /// Adds one query's ranking. Fails on duplicate qids, repeated docnos,
    /// or increasing scores.
    pub fn insert(&mut self, qid: &str, entries: Vec<RunEntry>) -> Result<(), EvalError> {
        check_ranking(qid, &entries)?;
        if self.runs.insert(qid.to_string(), entries).is_some() {
            return Err(EvalError::Run(format!("qid {qid} appears twice")));
        }
        Ok(())
    }

    pub fn docnos(&self, qid: &str) -> Vec<&str> {
        self.runs
            .get(qid)
            .map(|r| r.iter().map(|e| e.docno.as_str()).collect())
            .unwrap_or_default()
    }

    pub fn max_depth(&self) -> usize {
        self.runs.values().map(Vec::len).max().unwrap_or(0)
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self, EvalError> {
        let mut rows: BTreeMap<String, Vec<(usize, RunEntry)>> = BTreeMap::new();
        let mut tag: Option<String> = None;
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let ln = n + 1;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 6 {
                return Err(EvalError::Run(format!(
                    "line {ln}: expected 6 columns, got {}",
                    cols.len()
                )));
            }
            let rank: usize = cols[3]
                .parse()
                .map_err(|_| EvalError::Run(format!("line {ln}: bad rank {:?}", cols[3])))?;
            let score: f64 = cols[4]
                .parse()
                .ok()
                .filter(|s: &f64| s.is_finite())
                .ok_or_else(|| EvalError::Run(format!("line {ln}: bad score {:?}", cols[4])))?;
            match &tag {
                None => tag = Some(cols[5].to_string()),
                Some(t) if t != cols[5] => {
                    return Err(EvalError::Run(format!(
                        "line {ln}: mixed run tags {t} and {}",
                        cols[5]
                    )))
                }
                _ => {}
            }
            rows.entry(cols[0].to_string()).or_default().push((
                rank,
                RunEntry {
                    docno: cols[2].to_string(),
                    score,
                },
            ));
        }
        let mut run = RunFile::new(tag.unwrap_or_default());
        for (qid, mut entries) in rows {
            entries.sort_by_key(|e| e.0);
            if let Some((i, _)) = entries.iter().enumerate().find(|(i, e)| e.0 != i + 1) {
                return Err(EvalError::Run(format!(
                    "qid {qid}: ranks are not 1..{} (position {} has rank {})",
                    entries.len(),
                    i + 1,
                    entries[i].0
                )));
            }
            run.insert(&qid, entries.into_iter().map(|e| e.1).collect())?;
        }
        Ok(run)
    }

    /// Lines sorted by qid then rank. Scores use the shortest representation
    /// that round-trips.
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (qid, entries) in &self.runs {
            for (i, e) in entries.iter().enumerate() {
                writeln!(out, "{qid} Q0 {} {} {} {}", e.docno, i + 1, e.score, self.tag)?;
            }
        }
        out.flush()
    }
}

fn check_ranking(qid: &str, entries: &[RunEntry]) -> Result<(), EvalError> {
    let mut seen = HashSet::new();
    for (i, e) in entries.iter().enumerate() {
        if !seen.insert(e.docno.as_str()) {
            return Err(EvalError::Run(format!("qid {qid}: docno {} repeated", e.docno)));
        }
        if i > 0 && e.score > entries[i - 1].score {
            return Err(EvalError::Run(format!(
                "qid {qid}: score increases at rank {}",
                i + 1
            )));
        }
    }
    Ok(())
}
