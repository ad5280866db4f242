//! Document, query and relevance-judgment storage.
//!
//! The [`CorpusStore`] owns the mapping between external docnos and the dense
//! [`DocId`]s that every index, graph and embedding table is keyed by. It is
//! built once by [`ingest_corpus`] and is immutable afterwards.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

/// Dense internal document id, assigned in ingestion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DocId(pub u32);

impl DocId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub docno: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub qid: String,
    pub text: String,
}

impl Query {
    pub fn new(qid: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            qid: qid.into(),
            text: text.into(),
        }
    }
}

/// One line of a TREC qrels file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QrelEntry {
    pub qid: String,
    pub docno: String,
    pub grade: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate docno {docno:?}")]
    DuplicateDocno { line: usize, docno: String },
    #[error("line {line}: duplicate qid {qid:?}")]
    DuplicateQid { line: usize, qid: String },
    #[error("line {line}: negative relevance grade {grade} for {qid}/{docno}")]
    NegativeGrade {
        line: usize,
        qid: String,
        docno: String,
        grade: i64,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One `{"dropped": .., "kept": ..}` entry of a dedup report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupEntry {
    pub dropped: String,
    pub kept: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DedupReport {
    pub entries: Vec<DedupEntry>,
}

impl DedupReport {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// dropped docno -> kept docno
    pub fn mapping(&self) -> HashMap<&str, &str> {
        self.entries
            .iter()
            .map(|e| (e.dropped.as_str(), e.kept.as_str()))
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, CorpusError> {
        let mut entries = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: DedupEntry = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                line: i + 1,
                reason: e.to_string(),
            })?;
            entries.push(e);
        }
        Ok(Self { entries })
    }
}

/// Immutable document collection with the docno <-> [`DocId`] bijection.
#[derive(Debug, Clone, Default)]
pub struct CorpusStore {
    docs: Vec<Document>,
    by_docno: HashMap<String, DocId>,
    dropped: HashMap<String, String>,
}

impl CorpusStore {
    /// Builds a store from already-validated documents, in the given order.
    pub fn from_documents(docs: Vec<Document>) -> Result<Self, CorpusError> {
        let mut by_docno = HashMap::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            if d.docno.is_empty() {
                return Err(CorpusError::Malformed {
                    line: i + 1,
                    reason: "empty docno".into(),
                });
            }
            if d.text.trim().is_empty() {
                return Err(CorpusError::Malformed {
                    line: i + 1,
                    reason: format!("empty text for {}", d.docno),
                });
            }
            if by_docno.insert(d.docno.clone(), DocId(i as u32)).is_some() {
                return Err(CorpusError::DuplicateDocno {
                    line: i + 1,
                    docno: d.docno.clone(),
                });
            }
        }
        Ok(Self {
            docs,
            by_docno,
            dropped: HashMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, id: DocId) -> Option<&Document> {
        self.docs.get(id.index())
    }

    pub fn doc(&self, id: DocId) -> &Document {
        &self.docs[id.index()]
    }

    pub fn docno(&self, id: DocId) -> &str {
        &self.docs[id.index()].docno
    }

    pub fn text(&self, id: DocId) -> &str {
        &self.docs[id.index()].text
    }

    pub fn id_of(&self, docno: &str) -> Option<DocId> {
        self.by_docno.get(docno).copied()
    }

    /// Resolves a docno that may have been removed by dedup to the id of its
    /// kept representative.
    pub fn resolve(&self, docno: &str) -> Option<DocId> {
        self.id_of(docno)
            .or_else(|| self.dropped.get(docno).and_then(|kept| self.id_of(kept)))
    }

    pub fn ids(&self) -> impl ExactSizeIterator<Item = DocId> {
        (0..self.docs.len() as u32).map(DocId)
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn docnos(&self) -> impl Iterator<Item = &str> {
        self.docs.iter().map(|d| d.docno.as_str())
    }
}

/// Collapses whitespace runs and trims; no case folding.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Deserialize)]
struct JsonRecord {
    docno: Option<String>,
    text: Option<String>,
}

#[derive(Debug, Deserialize)]
struct JsonQuery {
    qid: Option<String>,
    text: Option<String>,
}

/// Reads `docno<TAB>text` or JSON-lines `{"docno","text"}` records. The
/// format is picked from the first byte of the stream.
pub fn read_records<R: BufRead>(mut input: R) -> Result<Vec<(usize, Document)>, CorpusError> {
    let json = input.fill_buf()?.first() == Some(&b'{');
    let mut out = Vec::new();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if input.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = std::str::from_utf8(&buf).map_err(|e| CorpusError::Malformed {
            line: line_no,
            reason: format!("invalid UTF-8: {e}"),
        })?;
        let line = line.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        let (docno, text) = if json {
            let rec: JsonRecord = serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
                line: line_no,
                reason: e.to_string(),
            })?;
            (rec.docno, rec.text)
        } else {
            match line.split_once('\t') {
                Some((d, t)) => (Some(d.to_string()), Some(t.to_string())),
                None => (Some(line.to_string()), None),
            }
        };
        let docno = docno
            .map(|d| d.trim().to_string())
            .filter(|d| !d.is_empty())
            .ok_or_else(|| CorpusError::Malformed {
                line: line_no,
                reason: "missing docno".into(),
            })?;
        let text = text
            .filter(|t| !t.trim().is_empty())
            .ok_or_else(|| CorpusError::Malformed {
                line: line_no,
                reason: format!("missing text for {docno}"),
            })?;
        out.push((line_no, Document { docno, text }));
    }
    Ok(out)
}

/// Ingests a corpus stream, optionally removing documents whose normalized
/// text duplicates another document. Within a duplicate group the
/// lexicographically smallest docno survives.
pub fn ingest_corpus<R: BufRead>(input: R, dedup: bool) -> Result<(CorpusStore, DedupReport), CorpusError> {
    let records = read_records(input)?;

    let mut seen: HashMap<&str, usize> = HashMap::with_capacity(records.len());
    for (line, d) in &records {
        if seen.insert(d.docno.as_str(), *line).is_some() {
            return Err(CorpusError::DuplicateDocno {
                line: *line,
                docno: d.docno.clone(),
            });
        }
    }

    if !dedup {
        let docs = records.into_iter().map(|(_, d)| d).collect();
        return Ok((CorpusStore::from_documents(docs)?, DedupReport::default()));
    }

    // normalized text -> smallest docno carrying it
    let mut keeper: HashMap<String, &str> = HashMap::with_capacity(records.len());
    let normalized: Vec<String> = records.iter().map(|(_, d)| normalize_text(&d.text)).collect();
    for ((_, d), norm) in records.iter().zip(&normalized) {
        keeper
            .entry(norm.clone())
            .and_modify(|k| {
                if d.docno.as_str() < *k {
                    *k = d.docno.as_str();
                }
            })
            .or_insert(d.docno.as_str());
    }

    let mut entries = Vec::new();
    let mut keep = Vec::with_capacity(keeper.len());
    for ((_, d), norm) in records.iter().zip(&normalized) {
        let k = keeper[norm];
        if k == d.docno {
            keep.push(d.clone());
        } else {
            entries.push(DedupEntry {
                dropped: d.docno.clone(),
                kept: k.to_string(),
            });
        }
    }

    let mut store = CorpusStore::from_documents(keep)?;
    store.dropped = entries
        .iter()
        .map(|e| (e.dropped.clone(), e.kept.clone()))
        .collect();
    Ok((store, DedupReport { entries }))
}

/// Reads `qid<TAB>text` or JSON-lines `{"qid","text"}` queries.
pub fn read_queries<R: BufRead>(mut input: R) -> Result<Vec<Query>, CorpusError> {
    let json = input.fill_buf()?.first() == Some(&b'{');
    let mut out: Vec<Query> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::Malformed {
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let (qid, text) = if json {
            let q: JsonQuery = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                line: line_no,
                reason: e.to_string(),
            })?;
            (q.qid, q.text)
        } else {
            match line.split_once('\t') {
                Some((q, t)) => (Some(q.to_string()), Some(t.to_string())),
                None => (Some(line), None),
            }
        };
        let (Some(qid), Some(text)) = (qid.filter(|q| !q.trim().is_empty()), text) else {
            return Err(CorpusError::Malformed {
                line: line_no,
                reason: "query needs qid and text".into(),
            });
        };
        let qid = qid.trim().to_string();
        if !seen.insert(qid.clone()) {
            return Err(CorpusError::DuplicateQid { line: line_no, qid });
        }
        out.push(Query { qid, text });
    }
    Ok(out)
}

pub fn write_queries<W: Write>(queries: &[Query], mut out: W) -> std::io::Result<()> {
    for q in queries {
        writeln!(out, "{}\t{}", q.qid, q.text)?;
    }
    Ok(())
}

/// Parses whitespace-separated `qid 0 docno grade` lines.
pub fn read_qrels<R: BufRead>(input: R) -> Result<Vec<QrelEntry>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 4 {
            return Err(CorpusError::Malformed {
                line: line_no,
                reason: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let grade: i64 = fields[3].parse().map_err(|_| CorpusError::Malformed {
            line: line_no,
            reason: format!("bad grade {:?}", fields[3]),
        })?;
        if grade < 0 {
            return Err(CorpusError::NegativeGrade {
                line: line_no,
                qid: fields[0].into(),
                docno: fields[2].into(),
                grade,
            });
        }
        out.push(QrelEntry {
            qid: fields[0].to_string(),
            docno: fields[2].to_string(),
            grade: u32::try_from(grade).map_err(|_| CorpusError::Malformed {
                line: line_no,
                reason: format!("grade {grade} out of range"),
            })?,
        });
    }
    Ok(out)
}

pub fn write_qrels<W: Write>(qrels: &[QrelEntry], mut out: W) -> std::io::Result<()> {
    for q in qrels {
        writeln!(out, "{} 0 {} {}", q.qid, q.docno, q.grade)?;
    }
    Ok(())
}

/// Per-query graded judgments keyed by internal id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QrelTable {
    grades: BTreeMap<String, HashMap<DocId, u32>>,
}

impl QrelTable {
    pub fn grades(&self, qid: &str) -> Option<&HashMap<DocId, u32>> {
        self.grades.get(qid)
    }

    pub fn grade(&self, qid: &str, id: DocId) -> u32 {
        self.grades
            .get(qid)
            .and_then(|g| g.get(&id))
            .copied()
            .unwrap_or(0)
    }

    pub fn qids(&self) -> impl Iterator<Item = &str> {
        self.grades.keys().map(String::as_str)
    }

    pub fn insert_max(&mut self, qid: &str, id: DocId, grade: u32) {
        let e = self
            .grades
            .entry(qid.to_string())
            .or_default()
            .entry(id)
            .or_insert(grade);
        *e = (*e).max(grade);
    }

    /// Re-keys the table by docno for evaluation.
    pub fn by_docno(&self, store: &CorpusStore) -> BTreeMap<String, HashMap<String, u32>> {
        self.grades
            .iter()
            .map(|(q, g)| {
                (
                    q.clone(),
                    g.iter()
                        .map(|(id, grade)| (store.docno(*id).to_string(), *grade))
                        .collect(),
                )
            })
            .collect()
    }
}

/// Maps qrels onto store ids. Judgments on deduplicated docnos move to the
/// kept representative, keeping the maximum grade. Docnos unknown to the store
/// are returned rather than dropped silently.
pub fn map_qrels(qrels: &[QrelEntry], store: &CorpusStore) -> (QrelTable, Vec<QrelEntry>) {
    let mut table = QrelTable::default();
    let mut absent = Vec::new();
    for q in qrels {
        match store.resolve(&q.docno) {
            Some(id) => table.insert_max(&q.qid, id, q.grade),
            None => absent.push(q.clone()),
        }
    }
    (table, absent)
}

/// Applies a dedup report to raw qrels, producing docno-keyed qrels with the
/// maximum-grade rule. Used when evaluating run files without a store.
pub fn remap_qrels(qrels: &[QrelEntry], report: &DedupReport) -> BTreeMap<String, HashMap<String, u32>> {
    let map = report.mapping();
    let mut out: BTreeMap<String, HashMap<String, u32>> = BTreeMap::new();
    for q in qrels {
        let docno = map.get(q.docno.as_str()).copied().unwrap_or(&q.docno);
        let e = out
            .entry(q.qid.clone())
            .or_default()
            .entry(docno.to_string())
            .or_insert(q.grade);
        *e = (*e).max(q.grade);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ingest(s: &str, dedup: bool) -> Result<(CorpusStore, DedupReport), CorpusError> {
        ingest_corpus(s.as_bytes(), dedup)
    }

    #[test]
    fn dedup_keeps_smallest_docno() {
        let (store, report) = ingest("d3\tsame text\nd1\tother\nd2\tsame   text \n", true).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(store.docnos().collect::<Vec<_>>(), ["d1", "d2"]);
        assert_eq!(
            report.entries,
            vec![DedupEntry {
                dropped: "d3".into(),
                kept: "d2".into()
            }]
        );
    }

    #[test]
    fn dedup_off_keeps_everything() {
        let (store, report) = ingest("d3\tsame text\nd1\tother\nd2\tsame text\n", false).unwrap();
        assert_eq!(store.len(), 3);
        assert!(report.is_empty());
    }

    #[test]
    fn no_case_folding_in_dedup() {
        let (store, _) = ingest("a\tThe Cat\nb\tthe cat\n", true).unwrap();
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn json_lines_detected() {
        let src = "{\"docno\":\"x\",\"text\":\"hello world\"}\n{\"docno\":\"y\",\"text\":\"bye\"}\n";
        let (store, _) = ingest(src, false).unwrap();
        assert_eq!(store.id_of("y"), Some(DocId(1)));
        assert_eq!(store.text(DocId(0)), "hello world");
    }

    #[test]
    fn malformed_records_report_line() {
        match ingest("a\tok\nb\n", false) {
            Err(CorpusError::Malformed { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match ingest("{\"docno\":\"a\"}\n", false) {
            Err(CorpusError::Malformed { line: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let bad = b"a\tok\nb\t\xff\xfe\n";
        match ingest_corpus(&bad[..], false) {
            Err(CorpusError::Malformed { line: 2, reason }) => assert!(reason.contains("UTF-8")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_docno_is_fatal() {
        assert!(matches!(
            ingest("a\tx\na\ty\n", true),
            Err(CorpusError::DuplicateDocno { line: 2, .. })
        ));
    }

    #[test]
    fn qrels_remap_to_kept_twin() {
        let (store, _) = ingest("P\tsame\nK\tsame\nO\tother\n", true).unwrap();
        let qrels = vec![QrelEntry {
            qid: "1".into(),
            docno: "P".into(),
            grade: 2,
        }];
        let (table, absent) = map_qrels(&qrels, &store);
        assert!(absent.is_empty());
        assert_eq!(table.grade("1", store.id_of("K").unwrap()), 2);

        let both = read_qrels("1 0 P 1\n1 0 K 3\n".as_bytes()).unwrap();
        let (table, _) = map_qrels(&both, &store);
        assert_eq!(table.grade("1", store.id_of("K").unwrap()), 3);
        assert_eq!(table.grades("1").unwrap().len(), 1);
    }

    #[test]
    fn qrels_with_absent_docno() {
        let (store, _) = ingest("a\tone\nb\ttwo\nc\tthree\nd\tfour\n", false).unwrap();
        let qrels = read_qrels("7 0 a 1\n7 0 b 0\n7 0 c 2\n7 0 d 1\n7 0 zz 3\n".as_bytes()).unwrap();
        let (table, absent) = map_qrels(&qrels, &store);
        assert_eq!(table.grades("7").unwrap().len(), 4);
        assert_eq!(absent.len(), 1);
        assert_eq!(absent[0].docno, "zz");
    }

    #[test]
    fn negative_grade_rejected() {
        assert!(matches!(
            read_qrels("1 0 a -1\n".as_bytes()),
            Err(CorpusError::NegativeGrade { line: 1, .. })
        ));
    }

    #[test]
    fn remap_qrels_via_report() {
        let report = DedupReport {
            entries: vec![DedupEntry {
                dropped: "D".into(),
                kept: "K".into(),
            }],
        };
        let qrels = read_qrels("1 0 D 1\n1 0 K 3\n2 0 D 2\n".as_bytes()).unwrap();
        let m = remap_qrels(&qrels, &report);
        assert_eq!(m["1"]["K"], 3);
        assert_eq!(m["2"]["K"], 2);
        assert!(!m["1"].contains_key("D"));
    }

    #[test]
    fn queries_roundtrip_and_reject_duplicates() {
        let qs = read_queries("1\tcat facts\n2\tdogs\n".as_bytes()).unwrap();
        assert_eq!(qs[1], Query::new("2", "dogs"));
        let mut buf = Vec::new();
        write_queries(&qs, &mut buf).unwrap();
        assert_eq!(read_queries(&buf[..]).unwrap(), qs);
        assert!(read_queries("1\ta\n1\tb\n".as_bytes()).is_err());
    }
}
