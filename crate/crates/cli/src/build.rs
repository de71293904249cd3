//! Table builders shared by the subcommands and the report, so a number in the
//! report is produced by exactly the code that prints it on its own.

use std::collections::{BTreeMap, BTreeSet};

use faitheval_core::agreement::kappa_report;
use faitheval_core::correlation::{human_labels, metric_correlations, CorrelationError, LabelKind, Pooling};
use faitheval_core::entail_eval::{class_distribution, select_summary, selection_eval, SelectionResult};
use faitheval_core::hallu_stats::{
    factual_breakdown, linguistic_flags, rep_incoh_table, span_stats, system_rows, DocFlags, UnionRule,
};
use faitheval_core::qa_eval::{qa_accuracy, QaVerdict};
use faitheval_core::rouge::{corpus_rouge, rouge_pair};
use faitheval_core::scorer::EntailmentScores;
use faitheval_core::{AnnotationSet, Corpus, PairKey, Task};

use crate::error::{data, qa, Result};
use crate::table::{
    fixed, optional, scaled, Table, AVERAGE_DECIMALS, CORRELATION_DECIMALS, KAPPA_DECIMALS,
    PERCENT_DECIMALS, ROUGE_DECIMALS,
};

fn keep(filter: Option<&[String]>, system: &str) -> bool {
    filter.is_none_or(|f| f.iter().any(|s| s == system))
}

fn pct(v: f64) -> String {
    fixed(v, PERCENT_DECIMALS)
}

fn opt_pct(v: Option<f64>) -> String {
    optional(v, PERCENT_DECIMALS)
}

/// ROUGE F1 of every summary of each system against the references.
pub fn rouge(corpus: &Corpus, references: &BTreeMap<String, String>, systems: &[String]) -> Result<Table> {
    let mut t = Table::new("rouge", &["system_id", "r1", "r2", "rl"]);
    for system in systems {
        let texts = corpus.summaries_for(system).map(|s| (s.doc_id.as_str(), s.text.as_str()));
        let r = corpus_rouge(system, texts, references).map_err(data("rouge"))?;
        t.push(vec![
            system.clone(),
            scaled(r.r1.f1, ROUGE_DECIMALS),
            scaled(r.r2.f1, ROUGE_DECIMALS),
            scaled(r.rl.f1, ROUGE_DECIMALS),
        ]);
    }
    Ok(t)
}

pub fn hallucination(
    flags: &BTreeMap<PairKey, DocFlags>,
    judged: &BTreeSet<String>,
    filter: Option<&[String]>,
) -> Table {
    let mut t = Table::new(
        "hallucination",
        &["system_id", "pairs", "intrinsic", "extrinsic", "union", "faithful", "faithful_or_factual"],
    );
    for r in system_rows(flags, judged).into_iter().filter(|r| keep(filter, &r.system_id)) {
        t.push(vec![
            r.system_id,
            r.pairs.to_string(),
            pct(r.pct_intrinsic),
            pct(r.pct_extrinsic),
            pct(r.pct_union),
            pct(r.pct_faithful),
            opt_pct(r.pct_faithful_or_factual),
        ]);
    }
    t
}

pub fn factual(set: &AnnotationSet, corpus: &Corpus, rule: UnionRule, filter: Option<&[String]>) -> Result<Table> {
    let mut t = Table::new(
        "factual_breakdown",
        &[
            "system_id",
            "pairs",
            "faithful",
            "intrinsic",
            "intrinsic_factual",
            "extrinsic",
            "extrinsic_factual",
            "union",
            "union_factual",
            "faithful_or_factual",
        ],
    );
    let rows = factual_breakdown(set, corpus, rule).map_err(data("hallu_stats"))?;
    for r in rows.into_iter().filter(|r| keep(filter, &r.system_id)) {
        t.push(vec![
            r.system_id,
            r.pairs.to_string(),
            pct(r.pct_faithful),
            pct(r.pct_intrinsic),
            opt_pct(r.pct_intrinsic_factual),
            pct(r.pct_extrinsic),
            opt_pct(r.pct_extrinsic_factual),
            pct(r.pct_union),
            opt_pct(r.pct_union_factual),
            opt_pct(r.pct_factual_total),
        ]);
    }
    Ok(t)
}

pub fn spans(set: &AnnotationSet, corpus: &Corpus, filter: Option<&[String]>) -> Result<Table> {
    let mut t = Table::new(
        "span_stats",
        &[
            "system_id",
            "documents",
            "total_intrinsic_spans",
            "total_extrinsic_spans",
            "avg_intrinsic_per_doc",
            "avg_extrinsic_per_doc",
            "avg_span_length",
            "avg_intrinsic_length",
            "avg_extrinsic_length",
        ],
    );
    let avg = |v: f64| fixed(v, AVERAGE_DECIMALS);
    for r in span_stats(set, corpus)
        .map_err(data("hallu_stats"))?
        .into_iter()
        .filter(|r| keep(filter, &r.system_id))
    {
        t.push(vec![
            r.system_id,
            r.documents.to_string(),
            r.total_intrinsic_spans.to_string(),
            r.total_extrinsic_spans.to_string(),
            avg(r.avg_intrinsic_per_doc),
            avg(r.avg_extrinsic_per_doc),
            avg(r.avg_span_length),
            avg(r.avg_intrinsic_length),
            avg(r.avg_extrinsic_length),
        ]);
    }
    Ok(t)
}

pub fn linguistic(set: &AnnotationSet, corpus: &Corpus, filter: Option<&[String]>) -> Result<Table> {
    let mut t = Table::new("linguistic", &["system_id", "pairs", "repetition", "incoherence"]);
    for r in rep_incoh_table(set, corpus)
        .map_err(data("hallu_stats"))?
        .into_iter()
        .filter(|r| keep(filter, &r.system_id) && r.pairs > 0)
    {
        t.push(vec![r.system_id, r.pairs.to_string(), pct(r.pct_repetition), pct(r.pct_incoherence)]);
    }
    Ok(t)
}

/// One row per system and task with a defined kappa.
pub fn agreement(set: &AnnotationSet, corpus: &Corpus, filter: Option<&[String]>) -> Result<Table> {
    let mut t = Table::new("agreement", &["system_id", "task", "kappa"]);
    let systems: BTreeSet<String> = Task::ALL.iter().flat_map(|task| set.systems(*task)).collect();
    for system in systems.into_iter().filter(|s| keep(filter, s)) {
        let k = kappa_report(set, corpus, &system).map_err(data("agreement"))?;
        for (task, value) in [
            ("hallucination", k.hallucination),
            ("factuality", k.factuality),
            ("repetition", k.repetition),
            ("incoherence", k.incoherence),
        ] {
            if let Some(v) = value {
                t.push(vec![system.clone(), task.to_string(), fixed(v, KAPPA_DECIMALS)]);
            }
        }
    }
    Ok(t)
}

/// Entailment class distribution over the given documents of each system.
pub fn entailment(scores: &EntailmentScores, docs: &BTreeMap<String, BTreeSet<String>>) -> Result<Table> {
    let mut t = Table::new("entailment", &["system_id", "pairs", "entail", "neutral", "contradict"]);
    for (system, doc_ids) in docs {
        let d = class_distribution(system, doc_ids.iter().map(String::as_str), scores)
            .map_err(data("entail_eval"))?;
        t.push(vec![
            d.system_id,
            d.pairs.to_string(),
            pct(d.pct_entail),
            pct(d.pct_neutral),
            pct(d.pct_contradict),
        ]);
    }
    Ok(t)
}

pub fn qa_accuracy_table(verdicts: &[QaVerdict], systems: &[String]) -> Result<Table> {
    let mut t = Table::new("qa", &["system_id", "n_questions", "accuracy"]);
    for system in systems {
        let a = qa_accuracy(verdicts, system).map_err(qa("qa_eval"))?;
        t.push(vec![a.system_id, a.n_questions.to_string(), pct(a.accuracy)]);
    }
    Ok(t)
}

pub fn qa_verdicts(verdicts: &[QaVerdict]) -> Table {
    let mut t = Table::new(
        "qa_verdicts",
        &["doc_id", "system_id", "q_index", "question", "expected_answer", "rc_answer", "matched"],
    );
    for v in verdicts {
        t.push(vec![
            v.doc_id.clone(),
            v.system_id.clone(),
            v.q_index.to_string(),
            v.question.clone(),
            v.expected_answer.clone(),
            v.rc_answer.clone(),
            v.matched.to_string(),
        ]);
    }
    t
}

/// A per-pair metric to correlate with human labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub values: BTreeMap<PairKey, f64>,
    /// When set, only labelled pairs with a value are correlated. Otherwise a
    /// labelled pair without a value is an error.
    pub partial: bool,
}

impl Metric {
    pub fn complete(name: impl Into<String>, values: BTreeMap<PairKey, f64>) -> Self {
        Metric {
            name: name.into(),
            values,
            partial: false,
        }
    }

    pub fn partial(name: impl Into<String>, values: BTreeMap<PairKey, f64>) -> Self {
        Metric {
            name: name.into(),
            values,
            partial: true,
        }
    }
}

/// ROUGE-1/2/L F1 of every annotated pair outside the reference system.
pub fn rouge_metrics(
    corpus: &Corpus,
    references: &BTreeMap<String, String>,
    pairs: impl IntoIterator<Item = PairKey>,
    reference_system: &str,
) -> Result<Vec<Metric>> {
    let mut maps: [BTreeMap<PairKey, f64>; 3] = Default::default();
    for pair in pairs.into_iter().filter(|p| p.system_id != reference_system) {
        let text = &corpus.require_summary(&pair).map_err(data("rouge"))?.text;
        let reference = references
            .get(&pair.doc_id)
            .ok_or_else(|| data("rouge")(format!("no reference for document {}", pair.doc_id)))?;
        let r = rouge_pair(text, reference);
        maps[0].insert(pair.clone(), r.r1.f1);
        maps[1].insert(pair.clone(), r.r2.f1);
        maps[2].insert(pair, r.rl.f1);
    }
    let [r1, r2, rl] = maps;
    Ok(vec![
        Metric::partial("rouge1", r1),
        Metric::partial("rouge2", r2),
        Metric::partial("rougeL", rl),
    ])
}

/// Unanimous repetition and incoherence flags as 0/1 metrics.
pub fn linguistic_metrics(set: &AnnotationSet, corpus: &Corpus) -> Result<Vec<Metric>> {
    let flags = linguistic_flags(set, corpus).map_err(data("hallu_stats"))?;
    let pick = |f: fn(&(bool, bool)) -> bool| -> BTreeMap<PairKey, f64> {
        flags.iter().map(|(p, v)| (p.clone(), f64::from(u8::from(f(v))))).collect()
    };
    Ok(vec![
        Metric::partial("repetition", pick(|v| v.0)),
        Metric::partial("incoherence", pick(|v| v.1)),
    ])
}

/// |Spearman| of each metric against each label kind. Labels are limited to
/// systems the metric covers. A constant series leaves its cell undefined.
pub fn correlation(
    metrics: &[Metric],
    flags: &BTreeMap<PairKey, DocFlags>,
    kinds: &[LabelKind],
    pooling: Pooling,
    filter: Option<&[String]>,
) -> Result<Table> {
    let mut t = Table::new("correlation", &["metric", "label", "scope", "n", "abs_rho"]);
    for metric in metrics {
        let covered: BTreeSet<&str> = metric.values.keys().map(|p| p.system_id.as_str()).collect();
        for &kind in kinds {
            let labels: BTreeMap<PairKey, bool> = human_labels(flags, kind)
                .into_iter()
                .filter(|(p, _)| keep(filter, &p.system_id) && covered.contains(p.system_id.as_str()))
                .filter(|(p, _)| !metric.partial || metric.values.contains_key(p))
                .collect();
            let scopes: Vec<(String, BTreeMap<PairKey, bool>)> = match pooling {
                Pooling::Pooled => vec![("all".to_string(), labels)],
                Pooling::PerSystem => {
                    let mut by_system: BTreeMap<String, BTreeMap<PairKey, bool>> = BTreeMap::new();
                    for (p, l) in labels {
                        by_system.entry(p.system_id.clone()).or_default().insert(p, l);
                    }
                    by_system.into_iter().collect()
                }
            };
            for (scope, labels) in scopes {
                let (n, rho) = match metric_correlations(&metric.values, &labels, Pooling::Pooled) {
                    Ok(rows) => (rows[0].n, Some(rows[0].abs_rho)),
                    Err(CorrelationError::DegenerateSeries | CorrelationError::TooShort(_)) => (labels.len(), None),
                    Err(e) => {
                        return Err(data("correlation")(format!("{} vs {}: {e}", metric.name, kind.as_str())))
                    }
                };
                t.push(vec![
                    metric.name.clone(),
                    kind.as_str().to_string(),
                    scope,
                    n.to_string(),
                    optional(rho, CORRELATION_DECIMALS),
                ]);
            }
        }
    }
    Ok(t)
}

/// Every document choosing `system`.
pub fn fixed_choice(
    system: &str,
    docs: &BTreeSet<String>,
    scores: &EntailmentScores,
) -> Result<Vec<SelectionResult>> {
    docs.iter()
        .map(|doc| {
            let key = PairKey::new(doc, system);
            let p = scores
                .get(&key)
                .map(|s| s.p_entail)
                .ok_or_else(|| data("entail_eval")(format!("no entailment score for {key}")))?;
            select_summary(doc, &[(system, p)]).map_err(data("entail_eval"))
        })
        .collect()
}

pub const SELECTION_HEADER: [&str; 7] =
    ["selector", "documents", "r1", "r2", "rl", "faithful", "faithful_or_factual"];

/// ROUGE and faithfulness of each named set of selections.
pub fn selection(
    name: &'static str,
    runs: &[(String, Vec<SelectionResult>)],
    corpus: &Corpus,
    references: &BTreeMap<String, String>,
    flags: &BTreeMap<PairKey, DocFlags>,
    judged: &BTreeSet<String>,
) -> Result<Table> {
    let mut t = Table::new(name, &SELECTION_HEADER);
    for (selector, selections) in runs {
        let e = selection_eval(selections, corpus, references, flags, judged).map_err(data("entail_eval"))?;
        t.push(selection_row(selector, &e));
    }
    Ok(t)
}

pub fn selection_row(selector: &str, e: &faitheval_core::entail_eval::SelectionEval) -> Vec<String> {
    vec![
        selector.to_string(),
        e.documents.to_string(),
        scaled(e.rouge.r1.f1, ROUGE_DECIMALS),
        scaled(e.rouge.r2.f1, ROUGE_DECIMALS),
        scaled(e.rouge.rl.f1, ROUGE_DECIMALS),
        pct(e.pct_faithful),
        opt_pct(e.pct_faithful_or_factual),
    ]
}

pub fn selections(results: &[SelectionResult]) -> Table {
    let mut t = Table::new("selections", &["doc_id", "chosen_system", "chosen_score"]);
    for r in results {
        t.push(vec![r.doc_id.clone(), r.chosen_system.clone(), r.chosen_score.to_string()]);
    }
    t
}
