//! ROUGE-1, ROUGE-2 and summary-level ROUGE-L.
//!
//! Matching is on lowercased surfaces from [`crate::corpus::tokenize`], with no
//! stemming or stopword removal. Corpus scores are the mean of per-pair scores.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::corpus::{tokenize, TokenSequence};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RougeError {
    #[error("no reference for document {0}")]
    MissingReference(String),
    #[error("no candidate summaries for system {0}")]
    NoPairs(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PrfScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrfScore {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        PrfScore {
            precision,
            recall,
            f1,
        }
    }

    fn from_counts(overlap: usize, candidate: usize, reference: usize) -> Self {
        if candidate == 0 || reference == 0 {
            return PrfScore::default();
        }
        PrfScore::from_pr(
            overlap as f64 / candidate as f64,
            overlap as f64 / reference as f64,
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RougeTriple {
    pub r1: PrfScore,
    pub r2: PrfScore,
    pub rl: PrfScore,
}

fn ngram_counts<'a>(tokens: &'a [&'a str], n: usize) -> HashMap<&'a [&'a str], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap between candidate and reference.
///
/// # Panics
///
/// If `n` is zero.
pub fn rouge_n(candidate: &TokenSequence, reference: &TokenSequence, n: usize) -> PrfScore {
    assert!(n >= 1, "n-gram order must be positive");
    let cand: Vec<&str> = candidate.surfaces().collect();
    let refs: Vec<&str> = reference.surfaces().collect();
    let cand_counts = ngram_counts(&cand, n);
    let ref_counts = ngram_counts(&refs, n);
    let overlap = cand_counts
        .iter()
        .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    PrfScore::from_counts(
        overlap,
        cand.len().saturating_sub(n - 1),
        refs.len().saturating_sub(n - 1),
    )
}

/// Length of the longest common subsequence, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

pub fn rouge_l(candidate: &TokenSequence, reference: &TokenSequence) -> PrfScore {
    let cand: Vec<&str> = candidate.surfaces().collect();
    let refs: Vec<&str> = reference.surfaces().collect();
    PrfScore::from_counts(lcs_len(&cand, &refs), cand.len(), refs.len())
}

/// Tokens used for lexical overlap: corpus tokens minus pure punctuation.
pub fn rouge_tokens(text: &str) -> TokenSequence {
    tokenize(text).without_punctuation()
}

/// ROUGE-1, ROUGE-2 and ROUGE-L of one candidate against one reference.
pub fn rouge_pair(candidate: &str, reference: &str) -> RougeTriple {
    let c = rouge_tokens(candidate);
    let r = rouge_tokens(reference);
    RougeTriple {
        r1: rouge_n(&c, &r, 1),
        r2: rouge_n(&c, &r, 2),
        rl: rouge_l(&c, &r),
    }
}

fn mean(scores: &[PrfScore]) -> PrfScore {
    let n = scores.len() as f64;
    PrfScore {
        precision: scores.iter().map(|s| s.precision).sum::<f64>() / n,
        recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
        f1: scores.iter().map(|s| s.f1).sum::<f64>() / n,
    }
}

/// Per-pair scores of one system, keyed by document.
pub fn pair_scores<'a>(
    candidates: impl IntoIterator<Item = (&'a str, &'a str)>,
    references: &BTreeMap<String, String>,
) -> Result<BTreeMap<String, RougeTriple>, RougeError> {
    candidates
        .into_iter()
        .map(|(doc_id, text)| {
            let reference = references
                .get(doc_id)
                .ok_or_else(|| RougeError::MissingReference(doc_id.to_string()))?;
            Ok((doc_id.to_string(), rouge_pair(text, reference)))
        })
        .collect()
}

/// Mean per-pair precision, recall and F1 of one system against references.
///
/// `candidates` yields `(doc_id, summary text)`.
pub fn corpus_rouge<'a>(
    system_id: &str,
    candidates: impl IntoIterator<Item = (&'a str, &'a str)>,
    references: &BTreeMap<String, String>,
) -> Result<RougeTriple, RougeError> {
    let scores = pair_scores(candidates, references)?;
    if scores.is_empty() {
        return Err(RougeError::NoPairs(system_id.to_string()));
    }
    let triples: Vec<&RougeTriple> = scores.values().collect();
    let pick = |f: fn(&RougeTriple) -> PrfScore| triples.iter().map(|t| f(t)).collect::<Vec<_>>();
    Ok(RougeTriple {
        r1: mean(&pick(|t| t.r1)),
        r2: mean(&pick(|t| t.r2)),
        rl: mean(&pick(|t| t.rl)),
    })
}
