//! Tab-separated score files with a header row.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use super::{
    EntailRequest, EntailmentScore, EntailmentScores, QaPair, QaPairs, QgRequest, RcAnswer,
    RcAnswers, RcRequest, ScoreError, ScoreKind, ScoreSource,
};
use crate::corpus::PairKey;
use crate::tsv::{Table, TableRow};

/// Contents of one score file.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreSet {
    Entailment(EntailmentScores),
    Similarity(BTreeMap<PairKey, f64>),
    QaPairs(QaPairs),
    RcAnswers(RcAnswers),
}

struct Rows<'a> {
    table: &'a Table,
    idx: Vec<usize>,
}

impl<'a> Rows<'a> {
    fn new(table: &'a Table, kind: ScoreKind) -> Result<Self, ScoreError> {
        let cols = table.columns(kind.columns().iter().copied())?;
        let idx = kind.columns().iter().map(|c| cols[c]).collect();
        Ok(Rows { table, idx })
    }

    fn iter(&self) -> impl Iterator<Item = Row<'_>> {
        self.table.rows.iter().map(|r| Row { row: r, idx: &self.idx })
    }
}

struct Row<'a> {
    row: &'a TableRow,
    idx: &'a [usize],
}

impl Row<'_> {
    fn line(&self) -> usize {
        self.row.line
    }

    fn text(&self, i: usize) -> &str {
        &self.row.fields[self.idx[i]]
    }

    fn required(&self, i: usize, name: &str) -> Result<String, ScoreError> {
        let v = self.text(i).trim();
        if v.is_empty() {
            return Err(ScoreError::SchemaError {
                line: self.line(),
                message: format!("empty {name}"),
            });
        }
        Ok(v.to_string())
    }

    fn parse<T: FromStr>(&self, i: usize, name: &str) -> Result<T, ScoreError> {
        self.text(i).trim().parse().map_err(|_| ScoreError::SchemaError {
            line: self.line(),
            message: format!("invalid {name} `{}`", self.text(i)),
        })
    }

    fn key(&self) -> Result<PairKey, ScoreError> {
        Ok(PairKey::new(self.required(0, "doc_id")?, self.required(1, "system_id")?))
    }
}

fn insert_unique<K: Ord, V>(map: &mut BTreeMap<K, V>, key: K, value: V, label: impl FnOnce() -> String) -> Result<(), ScoreError> {
    match map.entry(key) {
        Entry::Occupied(_) => Err(ScoreError::DuplicateKey(label())),
        Entry::Vacant(v) => {
            v.insert(value);
            Ok(())
        }
    }
}

pub fn parse_entailment(table: &Table) -> Result<EntailmentScores, ScoreError> {
    let rows = Rows::new(table, ScoreKind::Entailment)?;
    let mut out = BTreeMap::new();
    for r in rows.iter() {
        let key = r.key()?;
        let score = EntailmentScore {
            doc_id: key.doc_id.clone(),
            system_id: key.system_id.clone(),
            p_entail: r.parse(2, "p_entail")?,
            p_neutral: r.parse(3, "p_neutral")?,
            p_contradict: r.parse(4, "p_contradict")?,
        }
        .validated()?;
        let label = key.to_string();
        insert_unique(&mut out, key, score, || label)?;
    }
    Ok(out)
}

pub fn parse_similarity(table: &Table) -> Result<BTreeMap<PairKey, f64>, ScoreError> {
    let rows = Rows::new(table, ScoreKind::Similarity)?;
    let mut out = BTreeMap::new();
    for r in rows.iter() {
        let key = r.key()?;
        let score: f64 = r.parse(2, "score")?;
        if !score.is_finite() {
            return Err(ScoreError::SchemaError {
                line: r.line(),
                message: "non-finite score".into(),
            });
        }
        let label = key.to_string();
        insert_unique(&mut out, key, score, || label)?;
    }
    Ok(out)
}

pub fn parse_qa_pairs(table: &Table) -> Result<QaPairs, ScoreError> {
    let rows = Rows::new(table, ScoreKind::QaPairs)?;
    let mut flat = BTreeMap::new();
    for r in rows.iter() {
        let key = r.key()?;
        let q_index: usize = r.parse(2, "q_index")?;
        let pair = QaPair {
            doc_id: key.doc_id.clone(),
            system_id: key.system_id.clone(),
            q_index,
            question: r.required(3, "question")?,
            answer: r.required(4, "answer")?,
        };
        let label = format!("{key}#{q_index}");
        insert_unique(&mut flat, (key, q_index), pair, || label)?;
    }
    let mut out: QaPairs = BTreeMap::new();
    for ((key, _), pair) in flat {
        out.entry(key).or_default().push(pair);
    }
    Ok(out)
}

pub fn parse_rc_answers(table: &Table) -> Result<RcAnswers, ScoreError> {
    let rows = Rows::new(table, ScoreKind::RcAnswers)?;
    let mut out = BTreeMap::new();
    for r in rows.iter() {
        let key = r.key()?;
        let q_index: usize = r.parse(2, "q_index")?;
        let answer = RcAnswer {
            doc_id: key.doc_id.clone(),
            system_id: key.system_id.clone(),
            q_index,
            rc_answer: r.text(3).trim().to_string(),
        };
        let label = format!("{key}#{q_index}");
        insert_unique(&mut out, (key, q_index), answer, || label)?;
    }
    Ok(out)
}

/// Reads and validates a score file of the given kind.
pub fn load_scores(path: &Path, kind: ScoreKind) -> Result<ScoreSet, ScoreError> {
    let table = Table::read_path(path, b'\t')?;
    Ok(match kind {
        ScoreKind::Entailment => ScoreSet::Entailment(parse_entailment(&table)?),
        ScoreKind::Similarity => ScoreSet::Similarity(parse_similarity(&table)?),
        ScoreKind::QaPairs => ScoreSet::QaPairs(parse_qa_pairs(&table)?),
        ScoreKind::RcAnswers => ScoreSet::RcAnswers(parse_rc_answers(&table)?),
    })
}

pub fn load_entailment(path: &Path) -> Result<EntailmentScores, ScoreError> {
    parse_entailment(&Table::read_path(path, b'\t')?)
}

pub fn load_similarity(path: &Path) -> Result<BTreeMap<PairKey, f64>, ScoreError> {
    parse_similarity(&Table::read_path(path, b'\t')?)
}

pub fn load_qa_pairs(path: &Path) -> Result<QaPairs, ScoreError> {
    parse_qa_pairs(&Table::read_path(path, b'\t')?)
}

pub fn load_rc_answers(path: &Path) -> Result<RcAnswers, ScoreError> {
    parse_rc_answers(&Table::read_path(path, b'\t')?)
}

/// Score files as a [`ScoreSource`]. A kind whose file was not given answers
/// with [`ScoreError::NotConfigured`].
#[derive(Debug, Clone, Default)]
pub struct FileScores {
    pub entailment: Option<EntailmentScores>,
    pub qa_pairs: Option<QaPairs>,
    pub rc_answers: Option<RcAnswers>,
}

impl ScoreSource for FileScores {
    fn entailment(&self, requests: &[EntailRequest]) -> Result<EntailmentScores, ScoreError> {
        let scores = self
            .entailment
            .as_ref()
            .ok_or(ScoreError::NotConfigured(ScoreKind::Entailment))?;
        requests
            .iter()
            .map(|r| {
                let key = PairKey::new(&r.doc_id, &r.system_id);
                let s = scores.get(&key).cloned().ok_or_else(|| ScoreError::MissingScore {
                    kind: ScoreKind::Entailment,
                    key: key.to_string(),
                })?;
                Ok((key, s))
            })
            .collect()
    }

    /// A pair absent from the file generated no questions.
    fn questions(&self, requests: &[QgRequest]) -> Result<QaPairs, ScoreError> {
        let qa = self
            .qa_pairs
            .as_ref()
            .ok_or(ScoreError::NotConfigured(ScoreKind::QaPairs))?;
        Ok(requests
            .iter()
            .map(|r| {
                let key = PairKey::new(&r.doc_id, &r.system_id);
                let qs = qa.get(&key).cloned().unwrap_or_default();
                (key, qs)
            })
            .collect())
    }

    fn answers(&self, requests: &[RcRequest]) -> Result<RcAnswers, ScoreError> {
        let rc = self
            .rc_answers
            .as_ref()
            .ok_or(ScoreError::NotConfigured(ScoreKind::RcAnswers))?;
        requests
            .iter()
            .map(|r| {
                let key = (PairKey::new(&r.doc_id, &r.system_id), r.q_index);
                let a = rc.get(&key).cloned().ok_or_else(|| ScoreError::MissingScore {
                    kind: ScoreKind::RcAnswers,
                    key: format!("{}#{}", key.0, key.1),
                })?;
                Ok((key, a))
            })
            .collect()
    }
}
