//! Canonical data model: documents, per-system summaries, human annotations,
//! tokenization and character-span to word alignment.

mod annotations;
mod tokenize;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::tsv::{Table, TsvError};

pub use annotations::{
    ingest_annotations, span_to_words, validate_spans, AnnotationSet, ColumnMap, JudgmentRecord, SpanAnnotation,
    SpanLabel, Task, CANONICAL_COLUMNS, DEFAULT_ANNOTATORS,
};
pub use tokenize::{tokenize, Token, TokenSequence};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate key {0}")]
    DuplicateKey(String),
    #[error("empty field `{field}` at line {line}")]
    EmptyField { line: usize, field: &'static str },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("summary references unknown document {0}")]
    UnknownDocument(String),
    #[error("no summary for system {system_id} on document {doc_id}")]
    UnknownSystem { doc_id: String, system_id: String },
    #[error("span [{start}, {end}) out of range for a {len}-character summary")]
    SpanOutOfRange { start: usize, end: usize, len: usize },
    #[error("annotator {annotator_id} has overlapping spans on {doc_id}")]
    OverlappingSpans { annotator_id: String, doc_id: String },
    #[error("span [{start}, {end}) on {doc_id} covers no word")]
    SpanCoversNoWord {
        doc_id: String,
        start: usize,
        end: usize,
    },
    #[error("label {label} is not legal for the {task} task")]
    IllegalLabel { label: SpanLabel, task: Task },
    #[error("annotator {annotator_id} already has a {task} submission for {pair}")]
    DuplicateSubmission {
        pair: PairKey,
        task: Task,
        annotator_id: String,
    },
    #[error("line {line}: invalid {column} value `{value}`")]
    InvalidValue {
        line: usize,
        column: String,
        value: String,
    },
    #[error("invalid column map: {0}")]
    ColumnMap(String),
}

impl From<TsvError> for CorpusError {
    fn from(e: TsvError) -> Self {
        match e {
            TsvError::Io { path, source } => CorpusError::Io { path, source },
            TsvError::Parse { line, message } => CorpusError::Parse { line, message },
            TsvError::MissingColumn(c) => CorpusError::MissingColumn(c),
        }
    }
}

/// The `(doc_id, system_id)` key every per-summary quantity is indexed by.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairKey {
    pub doc_id: String,
    pub system_id: String,
}

impl PairKey {
    pub fn new(doc_id: impl Into<String>, system_id: impl Into<String>) -> Self {
        PairKey {
            doc_id: doc_id.into(),
            system_id: system_id.into(),
        }
    }
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.doc_id, self.system_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub doc_id: String,
    pub system_id: String,
    pub text: String,
}

impl SummaryRecord {
    pub fn key(&self) -> PairKey {
        PairKey::new(&self.doc_id, &self.system_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Jsonl,
    Tsv,
}

impl InputFormat {
    /// `.tsv`/`.tab` files are tab-separated, anything else is JSON lines.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") => InputFormat::Tsv,
            _ => InputFormat::Jsonl,
        }
    }
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(InputFormat::Jsonl),
            "tsv" => Ok(InputFormat::Tsv),
            other => Err(format!("unknown format `{other}` (expected jsonl or tsv)")),
        }
    }
}

fn read_to_string(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads rows of named string fields from a JSON-lines or TSV file.
fn read_records(
    path: &Path,
    format: InputFormat,
    fields: &[&'static str],
) -> Result<Vec<(usize, Vec<String>)>, CorpusError> {
    let mut out = Vec::new();
    match format {
        InputFormat::Jsonl => {
            let text = read_to_string(path)?;
            for (i, line) in text.lines().enumerate() {
                let line_no = i + 1;
                if line.trim().is_empty() {
                    continue;
                }
                let value: serde_json::Value =
                    serde_json::from_str(line).map_err(|e| CorpusError::Parse {
                        line: line_no,
                        message: e.to_string(),
                    })?;
                let mut row = Vec::with_capacity(fields.len());
                for field in fields {
                    let s = value.get(*field).and_then(|v| v.as_str()).ok_or_else(|| {
                        CorpusError::Parse {
                            line: line_no,
                            message: format!("missing string field `{field}`"),
                        }
                    })?;
                    row.push(s.to_string());
                }
                out.push((line_no, row));
            }
        }
        InputFormat::Tsv => {
            let table = Table::read_path(path, b'\t')?;
            let cols = table.columns(fields.iter().copied())?;
            for row in table.rows {
                let values = fields.iter().map(|f| row.fields[cols[f]].clone()).collect();
                out.push((row.line, values));
            }
        }
    }
    for (line, row) in &out {
        for (field, value) in fields.iter().zip(row) {
            if value.trim().is_empty() {
                return Err(CorpusError::EmptyField {
                    line: *line,
                    field,
                });
            }
        }
    }
    Ok(out)
}

/// Loads source documents; `doc_id` must be unique and `text` non-empty.
pub fn ingest_documents(path: &Path, format: InputFormat) -> Result<Vec<DocumentRecord>, CorpusError> {
    let rows = read_records(path, format, &["doc_id", "text"])?;
    let mut seen = BTreeSet::new();
    let mut docs = Vec::with_capacity(rows.len());
    for (_, mut row) in rows {
        let text = row.pop().expect("two fields");
        let doc_id = row.pop().expect("two fields");
        if !seen.insert(doc_id.clone()) {
            return Err(CorpusError::DuplicateKey(doc_id));
        }
        docs.push(DocumentRecord { doc_id, text });
    }
    Ok(docs)
}

/// Loads summaries; `(doc_id, system_id)` must be unique and `text` non-empty.
pub fn ingest_summaries(path: &Path, format: InputFormat) -> Result<Vec<SummaryRecord>, CorpusError> {
    let rows = read_records(path, format, &["doc_id", "system_id", "text"])?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (_, mut row) in rows {
        let text = row.pop().expect("three fields");
        let system_id = row.pop().expect("three fields");
        let doc_id = row.pop().expect("three fields");
        let rec = SummaryRecord {
            doc_id,
            system_id,
            text,
        };
        if !seen.insert(rec.key()) {
            return Err(CorpusError::DuplicateKey(rec.key().to_string()));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Documents and summaries, immutable once built.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    documents: BTreeMap<String, DocumentRecord>,
    summaries: BTreeMap<PairKey, SummaryRecord>,
    has_documents: bool,
}

impl Corpus {
    /// Builds a corpus, checking that every summary refers to a known document.
    pub fn new(
        documents: Vec<DocumentRecord>,
        summaries: Vec<SummaryRecord>,
    ) -> Result<Self, CorpusError> {
        let mut corpus = Corpus {
            has_documents: true,
            ..Corpus::default()
        };
        for doc in documents {
            if doc.text.is_empty() {
                return Err(CorpusError::EmptyField {
                    line: 0,
                    field: "text",
                });
            }
            if corpus.documents.contains_key(&doc.doc_id) {
                return Err(CorpusError::DuplicateKey(doc.doc_id));
            }
            corpus.documents.insert(doc.doc_id.clone(), doc);
        }
        corpus.add_summaries(summaries)?;
        Ok(corpus)
    }

    /// A corpus without document texts; enough for annotation and ROUGE work.
    pub fn from_summaries(summaries: Vec<SummaryRecord>) -> Result<Self, CorpusError> {
        let mut corpus = Corpus::default();
        corpus.add_summaries(summaries)?;
        Ok(corpus)
    }

    pub fn load(documents: Option<&Path>, summaries: &Path) -> Result<Self, CorpusError> {
        let sums = ingest_summaries(summaries, InputFormat::from_path(summaries))?;
        match documents {
            Some(p) => Corpus::new(ingest_documents(p, InputFormat::from_path(p))?, sums),
            None => Corpus::from_summaries(sums),
        }
    }

    fn add_summaries(&mut self, summaries: Vec<SummaryRecord>) -> Result<(), CorpusError> {
        for s in summaries {
            if s.text.is_empty() {
                return Err(CorpusError::EmptyField {
                    line: 0,
                    field: "text",
                });
            }
            if self.has_documents && !self.documents.contains_key(&s.doc_id) {
                return Err(CorpusError::UnknownDocument(s.doc_id));
            }
            let key = s.key();
            if self.summaries.contains_key(&key) {
                return Err(CorpusError::DuplicateKey(key.to_string()));
            }
            self.summaries.insert(key, s);
        }
        Ok(())
    }

    pub fn has_documents(&self) -> bool {
        self.has_documents
    }

    pub fn document(&self, doc_id: &str) -> Option<&DocumentRecord> {
        self.documents.get(doc_id)
    }

    pub fn documents(&self) -> impl Iterator<Item = &DocumentRecord> {
        self.documents.values()
    }

    pub fn summary(&self, key: &PairKey) -> Option<&SummaryRecord> {
        self.summaries.get(key)
    }

    /// Looks a summary up, reporting the missing pair as an error.
    pub fn require_summary(&self, key: &PairKey) -> Result<&SummaryRecord, CorpusError> {
        self.summaries
            .get(key)
            .ok_or_else(|| CorpusError::UnknownSystem {
                doc_id: key.doc_id.clone(),
                system_id: key.system_id.clone(),
            })
    }

    pub fn summaries(&self) -> impl Iterator<Item = &SummaryRecord> {
        self.summaries.values()
    }

    pub fn summaries_for<'a>(&'a self, system_id: &'a str) -> impl Iterator<Item = &'a SummaryRecord> {
        self.summaries
            .values()
            .filter(move |s| s.system_id == system_id)
    }

    pub fn systems(&self) -> BTreeSet<String> {
        self.summaries.keys().map(|k| k.system_id.clone()).collect()
    }

    /// Summary texts of one system keyed by document, e.g. the references.
    pub fn texts_for(&self, system_id: &str) -> BTreeMap<String, String> {
        self.summaries_for(system_id)
            .map(|s| (s.doc_id.clone(), s.text.clone()))
            .collect()
    }
}
