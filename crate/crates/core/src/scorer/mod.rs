//! Access to external neural scorers.
//!
//! Scores arrive either from precomputed TSV files ([`files`]) or from HTTP
//! services ([`gateway`]). Both paths produce the same validated records, so
//! downstream code is agnostic to where a score came from.

pub mod files;
pub mod gateway;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::PairKey;
use crate::tsv::TsvError;

pub use files::{load_scores, FileScores, ScoreSet};
pub use gateway::{
    CacheStats, Gateway, GatewayConfig, HttpTransport, Transport, TransportError,
};

/// Sums within this distance of 1 are accepted as-is.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;
/// Sums within this distance of 1 are renormalized; beyond it they are rejected.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Entailment,
    Similarity,
    QaPairs,
    RcAnswers,
}

impl ScoreKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Entailment => "entailment",
            ScoreKind::Similarity => "similarity",
            ScoreKind::QaPairs => "qa_pairs",
            ScoreKind::RcAnswers => "rc_answers",
        }
    }

    /// Required columns of the score-file schema, in canonical order.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            ScoreKind::Entailment => &["doc_id", "system_id", "p_entail", "p_neutral", "p_contradict"],
            ScoreKind::Similarity => &["doc_id", "system_id", "score"],
            ScoreKind::QaPairs => &["doc_id", "system_id", "q_index", "question", "answer"],
            ScoreKind::RcAnswers => &["doc_id", "system_id", "q_index", "rc_answer"],
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ScoreKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "entailment" => Ok(ScoreKind::Entailment),
            "similarity" => Ok(ScoreKind::Similarity),
            "qa_pairs" => Ok(ScoreKind::QaPairs),
            "rc_answers" => Ok(ScoreKind::RcAnswers),
            other => Err(format!("unknown score kind {other:?}")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("{0}")]
    Tsv(#[from] TsvError),
    #[error("schema error at line {line}: {message}")]
    SchemaError { line: usize, message: String },
    #[error("probabilities for {key} sum to {sum}")]
    ProbabilityNotNormalized { key: String, sum: f64 },
    #[error("probability {value} for {key} outside [0, 1]")]
    ProbabilityOutOfRange { key: String, value: f64 },
    #[error("duplicate score key {0}")]
    DuplicateKey(String),
    #[error("no {kind} score for {key}")]
    MissingScore { kind: ScoreKind, key: String },
    #[error("no endpoint configured for {0}")]
    NotConfigured(ScoreKind),
    #[error("{kind} endpoint unavailable after {attempts} attempts: {message}")]
    EndpointUnavailable {
        kind: ScoreKind,
        attempts: u32,
        message: String,
    },
    #[error("invalid {kind} response: {message}")]
    InvalidResponse { kind: ScoreKind, message: String },
}

impl ScoreError {
    /// Whether the failure lies with a scorer backend rather than local data.
    pub fn is_backend(&self) -> bool {
        matches!(
            self,
            ScoreError::NotConfigured(_)
                | ScoreError::EndpointUnavailable { .. }
                | ScoreError::InvalidResponse { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailmentScore {
    pub doc_id: String,
    pub system_id: String,
    pub p_entail: f64,
    pub p_neutral: f64,
    pub p_contradict: f64,
}

impl EntailmentScore {
    pub fn key(&self) -> PairKey {
        PairKey::new(&self.doc_id, &self.system_id)
    }

    /// Checks the simplex invariant, renormalizing small rounding drift.
    pub fn validated(mut self) -> Result<Self, ScoreError> {
        let key = self.key().to_string();
        let probs = [self.p_entail, self.p_neutral, self.p_contradict];
        if let Some(&value) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(ScoreError::ProbabilityOutOfRange { key, value });
        }
        let sum: f64 = probs.iter().sum();
        let drift = (sum - 1.0).abs();
        if drift > RENORMALIZE_TOLERANCE {
            return Err(ScoreError::ProbabilityNotNormalized { key, sum });
        }
        if drift > SIMPLEX_TOLERANCE {
            self.p_entail /= sum;
            self.p_neutral /= sum;
            self.p_contradict /= sum;
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub doc_id: String,
    pub system_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub doc_id: String,
    pub system_id: String,
    pub q_index: usize,
    pub question: String,
    pub answer: String,
}

impl QaPair {
    pub fn key(&self) -> PairKey {
        PairKey::new(&self.doc_id, &self.system_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RcAnswer {
    pub doc_id: String,
    pub system_id: String,
    pub q_index: usize,
    /// Empty when the reader found no answer.
    pub rc_answer: String,
}

/// Entailment scores keyed by pair.
pub type EntailmentScores = BTreeMap<PairKey, EntailmentScore>;
/// Generated questions per pair, ordered by `q_index`.
pub type QaPairs = BTreeMap<PairKey, Vec<QaPair>>;
/// Reader answers keyed by pair and question index.
pub type RcAnswers = BTreeMap<(PairKey, usize), RcAnswer>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntailRequest {
    pub doc_id: String,
    pub system_id: String,
    pub document: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QgRequest {
    pub doc_id: String,
    pub system_id: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RcRequest {
    pub doc_id: String,
    pub system_id: String,
    pub q_index: usize,
    pub question: String,
    pub context: String,
}

/// Anything that can answer scorer requests: score files or live services.
pub trait ScoreSource: Sync {
    fn entailment(&self, requests: &[EntailRequest]) -> Result<EntailmentScores, ScoreError>;
    fn questions(&self, requests: &[QgRequest]) -> Result<QaPairs, ScoreError>;
    fn answers(&self, requests: &[RcRequest]) -> Result<RcAnswers, ScoreError>;
}
