//! Question-answering round-trip consistency.
//!
//! Questions generated from a summary are answered by a reader against the
//! source document; a question counts as correct when the reader's answer
//! matches the summary's answer after normalization.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

use crate::corpus::{Corpus, PairKey};
use crate::scorer::{QgRequest, RcRequest, ScoreError, ScoreSource};
use crate::util::pct;

#[derive(Debug, thiserror::Error)]
pub enum QaError {
    #[error("no document text for {0}")]
    MissingDocument(String),
    #[error("no questions for system {0}")]
    NoQuestions(String),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

static NON_WORD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[^\p{L}\p{N}\p{M}\s]").expect("valid regex"));

/// Lowercase, strip punctuation, drop the articles a/an/the, collapse whitespace.
pub fn normalize_answer(s: &str) -> String {
    let lower = s.to_lowercase();
    let stripped = NON_WORD.replace_all(&lower, "");
    stripped
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Token-overlap F1 of two answers after normalization.
pub fn token_f1(expected: &str, actual: &str) -> f64 {
    let e = normalize_answer(expected);
    let a = normalize_answer(actual);
    let et: Vec<&str> = e.split_whitespace().collect();
    let at: Vec<&str> = a.split_whitespace().collect();
    if et.is_empty() || at.is_empty() {
        return 0.0;
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &et {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0;
    for t in &at {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let p = common as f64 / at.len() as f64;
    let r = common as f64 / et.len() as f64;
    2.0 * p * r / (p + r)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum MatchRule {
    /// Normalized strings are equal.
    #[default]
    Exact,
    /// Token F1 reaches the threshold.
    TokenF1 { threshold: f64 },
}

impl MatchRule {
    /// An empty normalized reader answer never matches.
    pub fn matches(self, expected: &str, rc_answer: &str) -> bool {
        let rc = normalize_answer(rc_answer);
        if rc.is_empty() {
            return false;
        }
        match self {
            MatchRule::Exact => normalize_answer(expected) == rc,
            MatchRule::TokenF1 { threshold } => token_f1(expected, rc_answer) >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QaVerdict {
    pub doc_id: String,
    pub system_id: String,
    pub q_index: usize,
    pub question: String,
    pub expected_answer: String,
    pub rc_answer: String,
    pub matched: bool,
}

impl QaVerdict {
    pub fn key(&self) -> PairKey {
        PairKey::new(&self.doc_id, &self.system_id)
    }
}

/// Generates questions for every summary of `systems` (all systems when
/// `None`) and answers them against the source documents.
pub fn run_roundtrip(
    corpus: &Corpus,
    systems: Option<&BTreeSet<String>>,
    source: &dyn ScoreSource,
    rule: MatchRule,
) -> Result<Vec<QaVerdict>, QaError> {
    let summaries: Vec<_> = corpus
        .summaries()
        .filter(|s| systems.is_none_or(|set| set.contains(&s.system_id)))
        .collect();
    for s in &summaries {
        if corpus.document(&s.doc_id).is_none() {
            return Err(QaError::MissingDocument(s.doc_id.clone()));
        }
    }
    let qg: Vec<QgRequest> = summaries
        .iter()
        .map(|s| QgRequest {
            doc_id: s.doc_id.clone(),
            system_id: s.system_id.clone(),
            summary: s.text.clone(),
        })
        .collect();
    let questions = source.questions(&qg)?;
    let pairs: Vec<_> = questions.values().flatten().collect();
    let rc: Vec<RcRequest> = pairs
        .iter()
        .map(|q| RcRequest {
            doc_id: q.doc_id.clone(),
            system_id: q.system_id.clone(),
            q_index: q.q_index,
            question: q.question.clone(),
            context: corpus.document(&q.doc_id).expect("checked above").text.clone(),
        })
        .collect();
    let answers = source.answers(&rc)?;
    Ok(pairs
        .into_iter()
        .map(|q| {
            let rc_answer = answers[&(q.key(), q.q_index)].rc_answer.clone();
            QaVerdict {
                doc_id: q.doc_id.clone(),
                system_id: q.system_id.clone(),
                q_index: q.q_index,
                question: q.question.clone(),
                matched: rule.matches(&q.answer, &rc_answer),
                expected_answer: q.answer.clone(),
                rc_answer,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QaAccuracy {
    pub system_id: String,
    pub n_questions: usize,
    pub matched: usize,
    pub accuracy: f64,
}

/// Percentage of the system's questions answered consistently.
pub fn qa_accuracy(verdicts: &[QaVerdict], system_id: &str) -> Result<QaAccuracy, QaError> {
    let mine: Vec<&QaVerdict> = verdicts.iter().filter(|v| v.system_id == system_id).collect();
    if mine.is_empty() {
        return Err(QaError::NoQuestions(system_id.to_string()));
    }
    let matched = mine.iter().filter(|v| v.matched).count();
    Ok(QaAccuracy {
        system_id: system_id.to_string(),
        n_questions: mine.len(),
        matched,
        accuracy: pct(matched, mine.len()),
    })
}

/// Fraction of matched questions per summary; summaries without questions
/// are absent.
pub fn pair_scores(verdicts: &[QaVerdict]) -> BTreeMap<PairKey, f64> {
    let mut acc: BTreeMap<PairKey, (usize, usize)> = BTreeMap::new();
    for v in verdicts {
        let e = acc.entry(v.key()).or_default();
        e.0 += usize::from(v.matched);
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (m, n))| (k, m as f64 / n as f64))
        .collect()
}
