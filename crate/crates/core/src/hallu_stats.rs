//! Aggregation of span annotations and factuality verdicts into per-system
//! hallucination, factuality, span and linguistic tables.
//!
//! A word is hallucinated of type X only when every rater covered it with an
//! X-labeled span. A summary carries flag X when at least one of its words is
//! unanimously X.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::corpus::{
    tokenize, AnnotationSet, Corpus, CorpusError, JudgmentRecord, PairKey, SpanAnnotation,
    SpanLabel, Task, TokenSequence,
};
use crate::util::pct;

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
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

/// How the summary-level "hallucinated" flag is derived.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UnionRule {
    /// Intrinsic flag OR extrinsic flag.
    #[default]
    DocumentFlags,
    /// Additionally, any word every rater marked with some hallucination
    /// label, even when the raters disagree on its type.
    AnyTypeUnanimous,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct WordFlags {
    pub unanimous_intrinsic: bool,
    pub unanimous_extrinsic: bool,
    /// Every rater marked the word, whatever the type.
    pub unanimous_any: bool,
}

fn expect_raters(
    pair: &PairKey,
    task: Task,
    found: usize,
    expected: usize,
) -> Result<(), StatsError> {
    if found != expected {
        return Err(StatsError::IncompleteAnnotation {
            pair: pair.clone(),
            task,
            found,
            expected,
        });
    }
    Ok(())
}

/// Per rater, a bit mask per word of the span labels covering it.
fn coverage(
    tokens: &TokenSequence,
    subs: &BTreeMap<String, Vec<SpanAnnotation>>,
) -> Result<Vec<Vec<u8>>, CorpusError> {
    subs.values()
        .map(|spans| {
            let mut mask = vec![0u8; tokens.len()];
            for span in spans {
                for w in tokens.word_range(span.char_start, span.char_end)? {
                    mask[w] |= 1 << span.label as u8;
                }
            }
            Ok(mask)
        })
        .collect()
}

/// Words on which every rater's mask satisfies `pred`.
fn all_raters(cover: &[Vec<u8>], words: usize, pred: impl Fn(u8) -> bool) -> Vec<bool> {
    (0..words)
        .map(|w| !cover.is_empty() && cover.iter().all(|m| pred(m[w])))
        .collect()
}

/// For each word, whether every rater covered it with a span labeled `label`.
pub fn unanimous_words(
    tokens: &TokenSequence,
    subs: &BTreeMap<String, Vec<SpanAnnotation>>,
    label: SpanLabel,
) -> Result<Vec<bool>, CorpusError> {
    let bit = 1 << label as u8;
    Ok(all_raters(&coverage(tokens, subs)?, tokens.len(), |m| m & bit != 0))
}

/// Per-word unanimity flags of one summary's hallucination annotations.
pub fn unanimous_word_labels(
    pair: &PairKey,
    tokens: &TokenSequence,
    subs: &BTreeMap<String, Vec<SpanAnnotation>>,
    raters: usize,
) -> Result<Vec<WordFlags>, StatsError> {
    expect_raters(pair, Task::Hallucination, subs.len(), raters)?;
    let cover = coverage(tokens, subs)?;
    let bit = |l: SpanLabel| 1u8 << l as u8;
    let intrinsic = all_raters(&cover, tokens.len(), |m| m & bit(SpanLabel::Intrinsic) != 0);
    let extrinsic = all_raters(&cover, tokens.len(), |m| m & bit(SpanLabel::Extrinsic) != 0);
    let any = all_raters(&cover, tokens.len(), |m| m != 0);
    Ok((0..tokens.len())
        .map(|w| WordFlags {
            unanimous_intrinsic: intrinsic[w],
            unanimous_extrinsic: extrinsic[w],
            unanimous_any: any[w],
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DocFlags {
    pub intrinsic: bool,
    pub extrinsic: bool,
    pub hallucinated: bool,
    pub faithful: bool,
    /// Unanimous factual verdict; only defined for hallucinated summaries
    /// with a full set of verdicts.
    pub factual: Option<bool>,
}

impl DocFlags {
    /// Faithful, or hallucinated and unanimously judged factual.
    pub fn faithful_or_factual(&self) -> bool {
        self.faithful || self.factual == Some(true)
    }
}

/// Summary-level flags from one summary's spans and optional verdicts.
pub fn doc_flags(
    pair: &PairKey,
    tokens: &TokenSequence,
    subs: &BTreeMap<String, Vec<SpanAnnotation>>,
    verdicts: Option<&BTreeMap<String, JudgmentRecord>>,
    raters: usize,
    rule: UnionRule,
) -> Result<DocFlags, StatsError> {
    let words = unanimous_word_labels(pair, tokens, subs, raters)?;
    let intrinsic = words.iter().any(|w| w.unanimous_intrinsic);
    let extrinsic = words.iter().any(|w| w.unanimous_extrinsic);
    let hallucinated = match rule {
        UnionRule::DocumentFlags => intrinsic || extrinsic,
        UnionRule::AnyTypeUnanimous => words.iter().any(|w| w.unanimous_any),
    };
    let factual = match verdicts {
        Some(v) if hallucinated && v.len() == raters => Some(v.values().all(|j| j.verdict)),
        _ => None,
    };
    Ok(DocFlags {
        intrinsic,
        extrinsic,
        hallucinated,
        faithful: !hallucinated,
        factual,
    })
}

/// Flags of every summary with hallucination annotations.
///
/// For a system that has factuality verdicts, each hallucinated summary must
/// have a complete set of them. Systems without any verdicts (the references)
/// keep `factual = None`.
pub fn pair_flags(
    set: &AnnotationSet,
    corpus: &Corpus,
    rule: UnionRule,
) -> Result<BTreeMap<PairKey, DocFlags>, StatsError> {
    let raters = set.annotators_per_item();
    let judged_systems = set.systems(Task::Factuality);
    let mut out = BTreeMap::new();
    for pair in set.pairs(Task::Hallucination) {
        let tokens = tokenize(&corpus.require_summary(&pair)?.text);
        let subs = set
            .span_submissions(&pair, Task::Hallucination)
            .expect("pair listed for task");
        let verdicts = set.verdicts(&pair);
        let flags = doc_flags(&pair, &tokens, subs, verdicts, raters, rule)?;
        if flags.hallucinated && judged_systems.contains(&pair.system_id) {
            expect_raters(&pair, Task::Factuality, verdicts.map_or(0, BTreeMap::len), raters)?;
        }
        out.insert(pair, flags);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemHalluRow {
    pub system_id: String,
    pub pairs: usize,
    pub pct_intrinsic: f64,
    pub pct_extrinsic: f64,
    pub pct_union: f64,
    pub pct_faithful: f64,
    /// `None` for systems without factuality verdicts.
    pub pct_faithful_or_factual: Option<f64>,
}

fn by_system(flags: &BTreeMap<PairKey, DocFlags>) -> BTreeMap<&str, Vec<&DocFlags>> {
    let mut out: BTreeMap<&str, Vec<&DocFlags>> = BTreeMap::new();
    for (pair, f) in flags {
        out.entry(pair.system_id.as_str()).or_default().push(f);
    }
    out
}

/// One hallucination row per system from precomputed pair flags.
pub fn system_rows(
    flags: &BTreeMap<PairKey, DocFlags>,
    judged_systems: &BTreeSet<String>,
) -> Vec<SystemHalluRow> {
    by_system(flags)
        .into_iter()
        .map(|(system, fs)| {
            let n = fs.len();
            let count = |p: fn(&DocFlags) -> bool| fs.iter().filter(|f| p(f)).count();
            let union = count(|f| f.hallucinated);
            SystemHalluRow {
                system_id: system.to_string(),
                pairs: n,
                pct_intrinsic: pct(count(|f| f.intrinsic), n),
                pct_extrinsic: pct(count(|f| f.extrinsic), n),
                pct_union: pct(union, n),
                pct_faithful: pct(n - union, n),
                pct_faithful_or_factual: judged_systems
                    .contains(system)
                    .then(|| pct(count(DocFlags::faithful_or_factual), n)),
            }
        })
        .collect()
}

/// Hallucination percentages per system.
pub fn system_table(
    set: &AnnotationSet,
    corpus: &Corpus,
    rule: UnionRule,
) -> Result<Vec<SystemHalluRow>, StatsError> {
    let flags = pair_flags(set, corpus, rule)?;
    Ok(system_rows(&flags, &set.systems(Task::Factuality)))
}

/// Per-type hallucination percentages and the share of each that was
/// unanimously judged factual, all over the system's summaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactualBreakdownRow {
    pub system_id: String,
    pub pairs: usize,
    pub pct_faithful: f64,
    pub pct_intrinsic: f64,
    pub pct_intrinsic_factual: Option<f64>,
    pub pct_extrinsic: f64,
    pub pct_extrinsic_factual: Option<f64>,
    pub pct_union: f64,
    pub pct_union_factual: Option<f64>,
    pub pct_factual_total: Option<f64>,
}

pub fn factual_breakdown(
    set: &AnnotationSet,
    corpus: &Corpus,
    rule: UnionRule,
) -> Result<Vec<FactualBreakdownRow>, StatsError> {
    let flags = pair_flags(set, corpus, rule)?;
    let judged = set.systems(Task::Factuality);
    Ok(by_system(&flags)
        .into_iter()
        .map(|(system, fs)| {
            let n = fs.len();
            let has = judged.contains(system);
            let count = |p: &dyn Fn(&DocFlags) -> bool| fs.iter().filter(|f| p(f)).count();
            let factual = |p: &dyn Fn(&DocFlags) -> bool| {
                has.then(|| pct(count(&|f: &DocFlags| p(f) && f.factual == Some(true)), n))
            };
            let faithful = count(&|f| f.faithful);
            FactualBreakdownRow {
                system_id: system.to_string(),
                pairs: n,
                pct_faithful: pct(faithful, n),
                pct_intrinsic: pct(count(&|f| f.intrinsic), n),
                pct_intrinsic_factual: factual(&|f| f.intrinsic),
                pct_extrinsic: pct(count(&|f| f.extrinsic), n),
                pct_extrinsic_factual: factual(&|f| f.extrinsic),
                pct_union: pct(count(&|f| f.hallucinated), n),
                pct_union_factual: factual(&|f| f.hallucinated),
                pct_factual_total: has
                    .then(|| pct(count(&|f| f.faithful_or_factual()), n)),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanStatsRow {
    pub system_id: String,
    pub documents: usize,
    pub total_intrinsic_spans: usize,
    pub total_extrinsic_spans: usize,
    pub avg_intrinsic_per_doc: f64,
    pub avg_extrinsic_per_doc: f64,
    /// Mean token count over all hallucination spans.
    pub avg_span_length: f64,
    pub avg_intrinsic_length: f64,
    pub avg_extrinsic_length: f64,
}

/// Span totals and lengths pooled over all raters. Per-document averages
/// divide by the number of annotated summaries of the system.
pub fn span_stats(set: &AnnotationSet, corpus: &Corpus) -> Result<Vec<SpanStatsRow>, StatsError> {
    #[derive(Default)]
    struct Acc {
        docs: usize,
        intrinsic: (usize, usize),
        extrinsic: (usize, usize),
    }
    let mut acc: BTreeMap<String, Acc> = BTreeMap::new();
    for pair in set.pairs(Task::Hallucination) {
        let tokens = tokenize(&corpus.require_summary(&pair)?.text);
        let a = acc.entry(pair.system_id.clone()).or_default();
        a.docs += 1;
        let subs = set
            .span_submissions(&pair, Task::Hallucination)
            .expect("pair listed for task");
        for span in subs.values().flatten() {
            let words = tokens.word_range(span.char_start, span.char_end)?.len();
            let slot = match span.label {
                SpanLabel::Intrinsic => &mut a.intrinsic,
                _ => &mut a.extrinsic,
            };
            slot.0 += 1;
            slot.1 += words;
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(acc
        .into_iter()
        .map(|(system_id, a)| SpanStatsRow {
            system_id,
            documents: a.docs,
            total_intrinsic_spans: a.intrinsic.0,
            total_extrinsic_spans: a.extrinsic.0,
            avg_intrinsic_per_doc: ratio(a.intrinsic.0, a.docs),
            avg_extrinsic_per_doc: ratio(a.extrinsic.0, a.docs),
            avg_span_length: ratio(a.intrinsic.1 + a.extrinsic.1, a.intrinsic.0 + a.extrinsic.0),
            avg_intrinsic_length: ratio(a.intrinsic.1, a.intrinsic.0),
            avg_extrinsic_length: ratio(a.extrinsic.1, a.extrinsic.0),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinguisticRow {
    pub system_id: String,
    pub pairs: usize,
    pub pct_repetition: f64,
    pub pct_incoherence: f64,
}

/// Per-summary linguistic flags: (unanimous repetition word, unanimous incoherence word).
pub fn linguistic_flags(
    set: &AnnotationSet,
    corpus: &Corpus,
) -> Result<BTreeMap<PairKey, (bool, bool)>, StatsError> {
    let mut out = BTreeMap::new();
    for pair in set.pairs(Task::Linguistic) {
        let subs = set
            .span_submissions(&pair, Task::Linguistic)
            .expect("pair listed for task");
        expect_raters(&pair, Task::Linguistic, subs.len(), set.annotators_per_item())?;
        let tokens = tokenize(&corpus.require_summary(&pair)?.text);
        let rep = unanimous_words(&tokens, subs, SpanLabel::Repetition)?.contains(&true);
        let inc = unanimous_words(&tokens, subs, SpanLabel::Incoherence)?.contains(&true);
        out.insert(pair, (rep, inc));
    }
    Ok(out)
}

/// Percentage of summaries with a unanimous repetition (incoherence) word.
/// Every system present in any task gets a row.
pub fn rep_incoh_table(set: &AnnotationSet, corpus: &Corpus) -> Result<Vec<LinguisticRow>, StatsError> {
    let flags = linguistic_flags(set, corpus)?;
    let systems: BTreeSet<String> = Task::ALL.iter().flat_map(|t| set.systems(*t)).collect();
    Ok(systems
        .into_iter()
        .map(|system_id| {
            let fs: Vec<&(bool, bool)> = flags
                .iter()
                .filter(|(p, _)| p.system_id == system_id)
                .map(|(_, f)| f)
                .collect();
            let n = fs.len();
            LinguisticRow {
                pct_repetition: pct(fs.iter().filter(|f| f.0).count(), n),
                pct_incoherence: pct(fs.iter().filter(|f| f.1).count(), n),
                system_id,
                pairs: n,
            }
        })
        .collect())
}
