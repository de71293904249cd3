//! Fleiss' kappa over rater labels.
//!
//! Span tasks are measured at the word level: every word of every summary of a
//! system is one item, pooled over the system's summaries. Factuality verdicts
//! are measured with one item per summary.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::corpus::{tokenize, AnnotationSet, Corpus, CorpusError, PairKey, SpanAnnotation, SpanLabel, Task, TokenSequence};

#[derive(Debug, thiserror::Error)]
pub enum AgreementError {
    #[error("no items to measure")]
    NoItems,
    #[error("need at least two raters, got {0}")]
    InsufficientRaters(usize),
    #[error("item {item} has counts summing to {sum}, expected {raters}")]
    RaggedCounts {
        item: usize,
        sum: usize,
        raters: usize,
    },
    #[error("{pair} has {found} {task} annotators, expected {expected}")]
    IncompleteAnnotation {
        pair: PairKey,
        task: Task,
        found: usize,
        expected: usize,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Category a single rater assigns to a single word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WordCategory {
    Faithful,
    Intrinsic,
    Extrinsic,
    Clean,
    Repetition,
    Incoherence,
}

impl WordCategory {
    fn unmarked(task: Task) -> Self {
        match task {
            Task::Linguistic => WordCategory::Clean,
            _ => WordCategory::Faithful,
        }
    }

    fn from_label(label: SpanLabel) -> Self {
        match label {
            SpanLabel::Intrinsic => WordCategory::Intrinsic,
            SpanLabel::Extrinsic => WordCategory::Extrinsic,
            SpanLabel::Repetition => WordCategory::Repetition,
            SpanLabel::Incoherence => WordCategory::Incoherence,
        }
    }
}

/// Per-word categories for each rater of one summary.
///
/// Words covered by a span take its label; all others are faithful
/// (hallucination task) or clean (linguistic task).
pub fn word_labels(
    tokens: &TokenSequence,
    spans_by_annotator: &BTreeMap<String, Vec<SpanAnnotation>>,
    task: Task,
) -> Result<BTreeMap<String, Vec<WordCategory>>, AgreementError> {
    let mut out = BTreeMap::new();
    for (annotator, spans) in spans_by_annotator {
        let mut labels = vec![WordCategory::unmarked(task); tokens.len()];
        for span in spans {
            let cat = WordCategory::from_label(span.label);
            for w in tokens.word_range(span.char_start, span.char_end)? {
                labels[w] = cat;
            }
        }
        out.insert(annotator.clone(), labels);
    }
    Ok(out)
}

/// Rater counts per category for each item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemCategoryCounts {
    pub raters: usize,
    pub rows: Vec<Vec<usize>>,
}

impl ItemCategoryCounts {
    pub fn new(raters: usize) -> Self {
        ItemCategoryCounts {
            raters,
            rows: Vec::new(),
        }
    }

    /// Adds one item from the raters' category indices (`< categories`).
    pub fn push_labels(&mut self, categories: usize, labels: impl IntoIterator<Item = usize>) {
        let mut row = vec![0; categories];
        for l in labels {
            row[l] += 1;
        }
        self.rows.push(row);
    }
}

/// Fleiss' kappa. Returns 1.0 when every label falls in one category.
pub fn fleiss_kappa(counts: &ItemCategoryCounts) -> Result<f64, AgreementError> {
    let raters = counts.raters;
    if raters < 2 {
        return Err(AgreementError::InsufficientRaters(raters));
    }
    let Some(first) = counts.rows.first() else {
        return Err(AgreementError::NoItems);
    };
    let k = first.len();
    let mut totals = vec![0usize; k];
    let mut agreement_sum = 0.0;
    for (item, row) in counts.rows.iter().enumerate() {
        let sum: usize = row.iter().sum();
        if row.len() != k || sum != raters {
            return Err(AgreementError::RaggedCounts { item, sum, raters });
        }
        let pairs: usize = row.iter().map(|&c| c * c).sum::<usize>() - raters;
        agreement_sum += pairs as f64 / (raters * (raters - 1)) as f64;
        for (t, c) in totals.iter_mut().zip(row) {
            *t += c;
        }
    }
    let n_items = counts.rows.len();
    let all_labels = n_items * raters;
    if totals.contains(&all_labels) {
        return Ok(1.0);
    }
    let p_bar = agreement_sum / n_items as f64;
    let p_e: f64 = totals
        .iter()
        .map(|&t| {
            let p = t as f64 / all_labels as f64;
            p * p
        })
        .sum();
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Kappa per task for one system; `None` where the system has no annotations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct KappaRow {
    pub hallucination: Option<f64>,
    pub factuality: Option<f64>,
    pub repetition: Option<f64>,
    pub incoherence: Option<f64>,
}

fn check_complete(set: &AnnotationSet, pair: &PairKey, task: Task) -> Result<(), AgreementError> {
    let found = set.rater_count(pair, task);
    if found != set.annotators_per_item() {
        return Err(AgreementError::IncompleteAnnotation {
            pair: pair.clone(),
            task,
            found,
            expected: set.annotators_per_item(),
        });
    }
    Ok(())
}

/// Word-level counts pooled over every summary of `system_id` for a span task.
/// `project` maps a word category to a count column.
fn pooled_word_counts(
    set: &AnnotationSet,
    corpus: &Corpus,
    system_id: &str,
    task: Task,
    categories: usize,
    project: impl Fn(WordCategory) -> usize,
) -> Result<Option<ItemCategoryCounts>, AgreementError> {
    let mut counts = ItemCategoryCounts::new(set.annotators_per_item());
    let mut any = false;
    for pair in set.pairs(task).iter().filter(|p| p.system_id == system_id) {
        any = true;
        check_complete(set, pair, task)?;
        let tokens = tokenize(&corpus.require_summary(pair)?.text);
        let subs = set.span_submissions(pair, task).expect("pair listed for task");
        let labels = word_labels(&tokens, subs, task)?;
        for w in 0..tokens.len() {
            counts.push_labels(categories, labels.values().map(|l| project(l[w])));
        }
    }
    Ok(any.then_some(counts))
}

fn kappa_or_none(counts: Option<ItemCategoryCounts>) -> Result<Option<f64>, AgreementError> {
    match counts {
        Some(c) if !c.rows.is_empty() => fleiss_kappa(&c).map(Some),
        _ => Ok(None),
    }
}

/// Agreement of one system's raters on every task.
///
/// Hallucination uses the categories faithful/intrinsic/extrinsic. Repetition
/// and incoherence are each measured as a binary word category. Factuality is
/// measured per summary with factual/non-factual.
pub fn kappa_report(
    set: &AnnotationSet,
    corpus: &Corpus,
    system_id: &str,
) -> Result<KappaRow, AgreementError> {
    let hallucination = pooled_word_counts(set, corpus, system_id, Task::Hallucination, 3, |c| match c {
        WordCategory::Intrinsic => 1,
        WordCategory::Extrinsic => 2,
        _ => 0,
    })?;
    let repetition = pooled_word_counts(set, corpus, system_id, Task::Linguistic, 2, |c| {
        usize::from(c == WordCategory::Repetition)
    })?;
    let incoherence = pooled_word_counts(set, corpus, system_id, Task::Linguistic, 2, |c| {
        usize::from(c == WordCategory::Incoherence)
    })?;

    let mut fact = ItemCategoryCounts::new(set.annotators_per_item());
    for pair in set.pairs(Task::Factuality).iter().filter(|p| p.system_id == system_id) {
        check_complete(set, pair, Task::Factuality)?;
        let verdicts = set.verdicts(pair).expect("pair listed for task");
        fact.push_labels(2, verdicts.values().map(|j| usize::from(j.verdict)));
    }

    Ok(KappaRow {
        hallucination: kappa_or_none(hallucination)?,
        factuality: kappa_or_none(Some(fact))?,
        repetition: kappa_or_none(repetition)?,
        incoherence: kappa_or_none(incoherence)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SummaryRecord;

    fn counts(raters: usize, rows: &[&[usize]]) -> ItemCategoryCounts {
        ItemCategoryCounts {
            raters,
            rows: rows.iter().map(|r| r.to_vec()).collect(),
        }
    }

    #[test]
    fn unanimous_two_categories() {
        // P̄ = 1, P̄e = 0.5.
        let k = fleiss_kappa(&counts(3, &[&[3, 0], &[3, 0], &[0, 3], &[0, 3]])).unwrap();
        assert_eq!(k, 1.0);
    }

    #[test]
    fn hand_example_quarter() {
        // P̄ = 2/3, P̄e = 5/9.
        let k = fleiss_kappa(&counts(3, &[&[2, 1], &[0, 3]])).unwrap();
        assert!((k - 0.25).abs() < 1e-12);
    }

    #[test]
    fn single_category_is_perfect() {
        assert_eq!(fleiss_kappa(&counts(3, &[&[3, 0, 0], &[3, 0, 0]])).unwrap(), 1.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            fleiss_kappa(&counts(1, &[&[1]])),
            Err(AgreementError::InsufficientRaters(1))
        ));
        assert!(matches!(
            fleiss_kappa(&counts(3, &[&[2, 0]])),
            Err(AgreementError::RaggedCounts { item: 0, sum: 2, raters: 3 })
        ));
        assert!(matches!(
            fleiss_kappa(&counts(3, &[&[3, 0], &[3]])),
            Err(AgreementError::RaggedCounts { item: 1, .. })
        ));
        assert!(matches!(fleiss_kappa(&counts(3, &[])), Err(AgreementError::NoItems)));
    }

    fn span(ann: &str, label: SpanLabel, s: usize, e: usize) -> SpanAnnotation {
        SpanAnnotation {
            doc_id: "d".into(),
            system_id: "s".into(),
            annotator_id: ann.into(),
            label,
            char_start: s,
            char_end: e,
        }
    }

    #[test]
    fn word_labels_defaults_and_marks() {
        // w0 w1 w2 w3 w4 -> chars 0-2, 3-5, 6-8, 9-11, 12-14
        let tokens = tokenize("w0 w1 w2 w3 w4");
        let subs = BTreeMap::from([
            ("a".to_string(), vec![span("a", SpanLabel::Intrinsic, 6, 8)]),
            ("b".to_string(), vec![]),
            ("c".to_string(), vec![span("c", SpanLabel::Extrinsic, 6, 11)]),
        ]);
        let labels = word_labels(&tokens, &subs, Task::Hallucination).unwrap();
        assert_eq!(labels["b"], vec![WordCategory::Faithful; 5]);
        assert_eq!(labels["a"][2], WordCategory::Intrinsic);
        assert_eq!(labels["a"][3], WordCategory::Faithful);
        assert_eq!(labels["c"][2..4], [WordCategory::Extrinsic, WordCategory::Extrinsic]);

        let ling = word_labels(&tokens, &BTreeMap::from([("a".to_string(), vec![])]), Task::Linguistic).unwrap();
        assert_eq!(ling["a"], vec![WordCategory::Clean; 5]);
    }

    #[test]
    fn single_intrinsic_mark_counts() {
        let tokens = tokenize("w0 w1 w2 w3 w4");
        let subs = BTreeMap::from([
            ("a".to_string(), vec![span("a", SpanLabel::Intrinsic, 6, 8)]),
            ("b".to_string(), vec![]),
            ("c".to_string(), vec![]),
        ]);
        let labels = word_labels(&tokens, &subs, Task::Hallucination).unwrap();
        let mut c = ItemCategoryCounts::new(3);
        c.push_labels(3, labels.values().map(|l| l[2] as usize));
        // faithful:2, intrinsic:1
        assert_eq!(c.rows[0], vec![2, 1, 0]);
    }

    #[test]
    fn report_single_summary_perfect() {
        let corpus = Corpus::from_summaries(vec![SummaryRecord {
            doc_id: "d".into(),
            system_id: "s".into(),
            text: "one two three".into(),
        }])
        .unwrap();
        let pair = PairKey::new("d", "s");
        let mut set = AnnotationSet::default();
        for a in ["a", "b", "c"] {
            set.insert_spans(&corpus, &pair, Task::Hallucination, a, &[(SpanLabel::Extrinsic, 4, 7)])
                .unwrap();
            set.insert_spans(&corpus, &pair, Task::Linguistic, a, &[]).unwrap();
            set.insert_judgment(
                &corpus,
                crate::corpus::JudgmentRecord {
                    doc_id: "d".into(),
                    system_id: "s".into(),
                    annotator_id: a.into(),
                    verdict: true,
                    evidence_note: None,
                },
            )
            .unwrap();
        }
        let row = kappa_report(&set, &corpus, "s").unwrap();
        assert_eq!(
            row,
            KappaRow {
                hallucination: Some(1.0),
                factuality: Some(1.0),
                repetition: Some(1.0),
                incoherence: Some(1.0)
            }
        );
        assert_eq!(kappa_report(&set, &corpus, "other").unwrap(), KappaRow::default());
    }

    #[test]
    fn report_flags_incomplete() {
        let corpus = Corpus::from_summaries(vec![SummaryRecord {
            doc_id: "d".into(),
            system_id: "s".into(),
            text: "one two".into(),
        }])
        .unwrap();
        let mut set = AnnotationSet::default();
        set.insert_spans(&corpus, &PairKey::new("d", "s"), Task::Hallucination, "a", &[])
            .unwrap();
        assert!(matches!(
            kappa_report(&set, &corpus, "s"),
            Err(AgreementError::IncompleteAnnotation { found: 1, .. })
        ));
    }
}
