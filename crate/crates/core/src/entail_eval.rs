//! Entailment-based evaluation: class distributions, entailment-argmax summary
//! selection, fine-tune export with document-keyed folds, and cross-validated
//! selection.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{Corpus, CorpusError, PairKey};
use crate::hallu_stats::DocFlags;
use crate::rouge::{corpus_rouge, RougeError, RougeTriple};
use crate::scorer::{EntailmentScore, EntailmentScores};
use crate::tsv::write_table;
use crate::util::pct;

#[derive(Debug, thiserror::Error)]
pub enum EntailError {
    #[error("no entailment score for {0}")]
    MissingScore(PairKey),
    #[error("no scored candidates for document {0}")]
    NoCandidates(String),
    #[error("no pairs to evaluate for {0}")]
    NoPairs(String),
    #[error("no hallucination annotation for selected pair {0}")]
    MissingAnnotation(PairKey),
    #[error("fold count must be at least 2, got {0}")]
    InvalidFolds(usize),
    #[error("no score file for fold {0}")]
    MissingFold(usize),
    #[error("score file for fold {fold} contains {doc_id}, which is not held out in that fold")]
    FoldLeakage { fold: usize, doc_id: String },
    #[error("no document text for {0}")]
    MissingDocument(String),
    #[error(transparent)]
    Rouge(#[from] RougeError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EntailClass {
    Entailment,
    Neutral,
    Contradiction,
}

impl EntailClass {
    pub fn as_str(self) -> &'static str {
        match self {
            EntailClass::Entailment => "entailment",
            EntailClass::Neutral => "neutral",
            EntailClass::Contradiction => "contradiction",
        }
    }
}

/// Argmax class; ties go to contradiction, then neutral.
pub fn classify(score: &EntailmentScore) -> EntailClass {
    let (e, n, c) = (score.p_entail, score.p_neutral, score.p_contradict);
    if c >= n && c >= e {
        EntailClass::Contradiction
    } else if n >= e {
        EntailClass::Neutral
    } else {
        EntailClass::Entailment
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassDistribution {
    pub system_id: String,
    pub pairs: usize,
    pub pct_entail: f64,
    pub pct_neutral: f64,
    pub pct_contradict: f64,
}

/// Class percentages of one system over the given documents.
pub fn class_distribution<'a>(
    system_id: &str,
    doc_ids: impl IntoIterator<Item = &'a str>,
    scores: &EntailmentScores,
) -> Result<ClassDistribution, EntailError> {
    let mut counts = [0usize; 3];
    let mut n = 0;
    for doc in doc_ids {
        let key = PairKey::new(doc, system_id);
        let s = scores.get(&key).ok_or(EntailError::MissingScore(key))?;
        counts[classify(s) as usize] += 1;
        n += 1;
    }
    if n == 0 {
        return Err(EntailError::NoPairs(system_id.to_string()));
    }
    Ok(ClassDistribution {
        system_id: system_id.to_string(),
        pairs: n,
        pct_entail: pct(counts[0], n),
        pct_neutral: pct(counts[1], n),
        pct_contradict: pct(counts[2], n),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub doc_id: String,
    pub chosen_system: String,
    pub chosen_score: f64,
    pub candidates_considered: usize,
}

impl SelectionResult {
    pub fn key(&self) -> PairKey {
        PairKey::new(&self.doc_id, &self.chosen_system)
    }
}

/// Candidate with the highest entailment probability; exact ties go to the
/// lexicographically smallest system id.
pub fn select_summary(doc_id: &str, candidates: &[(&str, f64)]) -> Result<SelectionResult, EntailError> {
    let (system, score) = candidates
        .iter()
        .copied()
        .reduce(|best, c| {
            if c.1 > best.1 || (c.1 == best.1 && c.0 < best.0) {
                c
            } else {
                best
            }
        })
        .ok_or_else(|| EntailError::NoCandidates(doc_id.to_string()))?;
    Ok(SelectionResult {
        doc_id: doc_id.to_string(),
        chosen_system: system.to_string(),
        chosen_score: score,
        candidates_considered: candidates.len(),
    })
}

/// Selects among `systems` for every document in `doc_ids`, or for every
/// document present in `scores` when `doc_ids` is `None`. Each system must be
/// scored on each selected document. Results are ordered by document.
pub fn select_all(
    scores: &EntailmentScores,
    systems: &[String],
    doc_ids: Option<&BTreeSet<String>>,
) -> Result<Vec<SelectionResult>, EntailError> {
    let docs: BTreeSet<String> = match doc_ids {
        Some(d) => d.clone(),
        None => scores
            .keys()
            .filter(|k| systems.contains(&k.system_id))
            .map(|k| k.doc_id.clone())
            .collect(),
    };
    docs.iter()
        .map(|doc| {
            let candidates = systems
                .iter()
                .map(|s| {
                    let key = PairKey::new(doc, s);
                    scores
                        .get(&key)
                        .map(|sc| (s.as_str(), sc.p_entail))
                        .ok_or(EntailError::MissingScore(key))
                })
                .collect::<Result<Vec<_>, _>>()?;
            select_summary(doc, &candidates)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionEval {
    pub documents: usize,
    pub rouge: RougeTriple,
    pub pct_faithful: f64,
    /// `None` when some chosen system has no factuality verdicts.
    pub pct_faithful_or_factual: Option<f64>,
}

/// ROUGE against references plus faithful and +factual percentages of the
/// chosen summaries.
pub fn selection_eval(
    selections: &[SelectionResult],
    corpus: &Corpus,
    references: &BTreeMap<String, String>,
    flags: &BTreeMap<PairKey, DocFlags>,
    judged_systems: &BTreeSet<String>,
) -> Result<SelectionEval, EntailError> {
    let mut texts = Vec::with_capacity(selections.len());
    let mut chosen = Vec::with_capacity(selections.len());
    for s in selections {
        let key = s.key();
        let f = flags.get(&key).ok_or_else(|| EntailError::MissingAnnotation(key.clone()))?;
        texts.push((s.doc_id.as_str(), corpus.require_summary(&key)?.text.as_str()));
        chosen.push((s.chosen_system.as_str(), f));
    }
    let rouge = corpus_rouge("selection", texts, references)?;
    let n = chosen.len();
    let faithful = chosen.iter().filter(|(_, f)| f.faithful).count();
    let factual_defined = chosen.iter().all(|(sys, _)| judged_systems.contains(*sys));
    let plus_fact = chosen.iter().filter(|(_, f)| f.faithful_or_factual()).count();
    Ok(SelectionEval {
        documents: n,
        rouge,
        pct_faithful: pct(faithful, n),
        pct_faithful_or_factual: factual_defined.then(|| pct(plus_fact, n)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FinetuneLabel {
    Entailment,
    Neutral,
}

impl FinetuneLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            FinetuneLabel::Entailment => "entailment",
            FinetuneLabel::Neutral => "neutral",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinetunePair {
    pub doc_id: String,
    pub system_id: String,
    pub document_text: String,
    pub summary_text: String,
    pub label: FinetuneLabel,
    pub fold: usize,
}

/// Fold of every document: sorted ids, seeded shuffle, then round-robin.
pub fn assign_folds(
    doc_ids: impl IntoIterator<Item = String>,
    k: usize,
    seed: u64,
) -> Result<BTreeMap<String, usize>, EntailError> {
    if k < 2 {
        return Err(EntailError::InvalidFolds(k));
    }
    let mut docs: Vec<String> = doc_ids.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    docs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(docs.into_iter().enumerate().map(|(i, d)| (d, i % k)).collect())
}

/// Training pairs labelled entailment when faithful and neutral otherwise.
/// `systems` restricts the exported systems; folds are assigned over the
/// documents of the exported pairs.
pub fn export_finetune(
    flags: &BTreeMap<PairKey, DocFlags>,
    corpus: &Corpus,
    k: usize,
    seed: u64,
    systems: Option<&BTreeSet<String>>,
) -> Result<Vec<FinetunePair>, EntailError> {
    let selected: Vec<(&PairKey, &DocFlags)> = flags
        .iter()
        .filter(|(p, _)| systems.is_none_or(|s| s.contains(&p.system_id)))
        .collect();
    let folds = assign_folds(selected.iter().map(|(p, _)| p.doc_id.clone()), k, seed)?;
    selected
        .into_iter()
        .map(|(pair, f)| {
            let document = corpus
                .document(&pair.doc_id)
                .ok_or_else(|| EntailError::MissingDocument(pair.doc_id.clone()))?;
            Ok(FinetunePair {
                doc_id: pair.doc_id.clone(),
                system_id: pair.system_id.clone(),
                document_text: document.text.clone(),
                summary_text: corpus.require_summary(pair)?.text.clone(),
                label: if f.faithful {
                    FinetuneLabel::Entailment
                } else {
                    FinetuneLabel::Neutral
                },
                fold: folds[&pair.doc_id],
            })
        })
        .collect()
}

pub const FINETUNE_COLUMNS: [&str; 5] = ["doc_id", "system_id", "document_text", "summary_text", "label"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldFiles {
    pub fold: usize,
    /// Pairs of every other fold.
    pub train: String,
    /// Pairs held out in this fold.
    pub eval: String,
}

/// Train/eval TSV contents for each fold.
pub fn fold_files(pairs: &[FinetunePair], k: usize) -> Vec<FoldFiles> {
    let row = |p: &FinetunePair| {
        vec![
            p.doc_id.clone(),
            p.system_id.clone(),
            p.document_text.clone(),
            p.summary_text.clone(),
            p.label.as_str().to_string(),
        ]
    };
    (0..k)
        .map(|fold| {
            let (eval, train): (Vec<&FinetunePair>, Vec<&FinetunePair>) =
                pairs.iter().partition(|p| p.fold == fold);
            FoldFiles {
                fold,
                train: write_table(&FINETUNE_COLUMNS, &train.into_iter().map(row).collect::<Vec<_>>()),
                eval: write_table(&FINETUNE_COLUMNS, &eval.into_iter().map(row).collect::<Vec<_>>()),
            }
        })
        .collect()
}

/// Selections on each fold's held-out documents using that fold's scores,
/// evaluated over their union.
///
/// `fold_scores[f]` must only contain documents assigned to fold `f`.
#[allow(clippy::too_many_arguments)]
pub fn crossval_eval(
    fold_scores: &[EntailmentScores],
    folds: &BTreeMap<String, usize>,
    k: usize,
    systems: &[String],
    corpus: &Corpus,
    references: &BTreeMap<String, String>,
    flags: &BTreeMap<PairKey, DocFlags>,
    judged_systems: &BTreeSet<String>,
) -> Result<(SelectionEval, Vec<SelectionResult>), EntailError> {
    let mut selections = Vec::new();
    for fold in 0..k {
        let scores = fold_scores.get(fold).ok_or(EntailError::MissingFold(fold))?;
        if let Some(key) = scores.keys().find(|key| folds.get(&key.doc_id) != Some(&fold)) {
            return Err(EntailError::FoldLeakage {
                fold,
                doc_id: key.doc_id.clone(),
            });
        }
        let held_out: BTreeSet<String> = folds
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(d, _)| d.clone())
            .collect();
        selections.extend(select_all(scores, systems, Some(&held_out))?);
    }
    selections.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    let eval = selection_eval(&selections, corpus, references, flags, judged_systems)?;
    Ok((eval, selections))
}

/// Restricts a score set to the documents of one fold.
pub fn scores_for_fold(scores: &EntailmentScores, folds: &BTreeMap<String, usize>, fold: usize) -> EntailmentScores {
    scores
        .iter()
        .filter(|(k, _)| folds.get(&k.doc_id) == Some(&fold))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DocumentRecord, SummaryRecord};

    fn score(doc: &str, sys: &str, e: f64, n: f64, c: f64) -> EntailmentScore {
        EntailmentScore {
            doc_id: doc.into(),
            system_id: sys.into(),
            p_entail: e,
            p_neutral: n,
            p_contradict: c,
        }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&score("d", "s", 0.7, 0.2, 0.1)), EntailClass::Entailment);
        assert_eq!(classify(&score("d", "s", 0.2, 0.3, 0.5)), EntailClass::Contradiction);
        assert_eq!(classify(&score("d", "s", 0.4, 0.4, 0.2)), EntailClass::Neutral);
        assert_eq!(classify(&score("d", "s", 0.4, 0.2, 0.4)), EntailClass::Contradiction);
        let third = 1.0 / 3.0;
        assert_eq!(classify(&score("d", "s", third, third, third)), EntailClass::Contradiction);
    }

    #[test]
    fn distributions() {
        let scores: EntailmentScores = [
            score("a", "s", 0.9, 0.05, 0.05),
            score("b", "s", 0.1, 0.1, 0.8),
        ]
        .into_iter()
        .map(|s| (s.key(), s))
        .collect();
        let d = class_distribution("s", ["a", "b"], &scores).unwrap();
        assert_eq!((d.pct_entail, d.pct_neutral, d.pct_contradict), (50.0, 0.0, 50.0));
        let d = class_distribution("s", ["a"], &scores).unwrap();
        assert_eq!(d.pct_entail, 100.0);
        assert!(matches!(
            class_distribution("s", ["z"], &scores),
            Err(EntailError::MissingScore(_))
        ));
    }

    #[test]
    fn selection_tie_break() {
        let r = select_summary("d", &[("ptgen", 0.3), ("tconvs2s", 0.9), ("berts2s", 0.9)]).unwrap();
        assert_eq!(r.chosen_system, "berts2s");
        assert_eq!(r.candidates_considered, 3);
        let r = select_summary("d", &[("only", 0.1)]).unwrap();
        assert_eq!(r.chosen_system, "only");
        assert!(matches!(select_summary("d", &[]), Err(EntailError::NoCandidates(_))));
    }

    #[test]
    fn folds_deterministic_and_balanced() {
        let docs: Vec<String> = (0..500).map(|i| format!("doc{i:03}")).collect();
        let a = assign_folds(docs.clone(), 5, 42).unwrap();
        let b = assign_folds(docs.into_iter().rev(), 5, 42).unwrap();
        assert_eq!(a, b);
        for f in 0..5 {
            assert_eq!(a.values().filter(|&&x| x == f).count(), 100);
        }
        assert!(matches!(assign_folds(Vec::new(), 1, 0), Err(EntailError::InvalidFolds(1))));
    }

    fn flags(faithful: bool) -> DocFlags {
        DocFlags {
            intrinsic: false,
            extrinsic: !faithful,
            hallucinated: !faithful,
            faithful,
            factual: None,
        }
    }

    fn small_corpus() -> Corpus {
        let docs = (0..4)
            .map(|i| DocumentRecord {
                doc_id: format!("d{i}"),
                text: format!("document {i}"),
            })
            .collect();
        let mut sums = Vec::new();
        for i in 0..4 {
            for (s, t) in [("a", "x y"), ("b", "x z"), ("gold", "x y")] {
                sums.push(SummaryRecord {
                    doc_id: format!("d{i}"),
                    system_id: s.into(),
                    text: t.into(),
                });
            }
        }
        Corpus::new(docs, sums).unwrap()
    }

    #[test]
    fn export_labels_and_files() {
        let c = small_corpus();
        let fl = BTreeMap::from([
            (PairKey::new("d0", "a"), flags(true)),
            (PairKey::new("d0", "b"), flags(false)),
            (PairKey::new("d1", "a"), flags(true)),
        ]);
        let pairs = export_finetune(&fl, &c, 2, 7, None).unwrap();
        assert_eq!(pairs[0].label, FinetuneLabel::Entailment);
        assert_eq!(pairs[1].label, FinetuneLabel::Neutral);
        assert_eq!(pairs[0].fold, pairs[1].fold);
        assert_eq!(pairs[0].document_text, "document 0");
        let files = fold_files(&pairs, 2);
        assert_eq!(files.len(), 2);
        for f in &files {
            assert!(f.train.starts_with("doc_id\tsystem_id\tdocument_text\tsummary_text\tlabel\n"));
        }
        let only_b = BTreeSet::from(["b".to_string()]);
        assert_eq!(export_finetune(&fl, &c, 2, 7, Some(&only_b)).unwrap().len(), 1);
    }

    #[test]
    fn crossval_leakage_and_degenerate_equality() {
        let c = small_corpus();
        let systems = vec!["a".to_string(), "b".to_string()];
        let mut fl = BTreeMap::new();
        let mut scores = EntailmentScores::new();
        for i in 0..4 {
            let d = format!("d{i}");
            fl.insert(PairKey::new(&d, "a"), flags(i % 2 == 0));
            fl.insert(PairKey::new(&d, "b"), flags(i % 2 == 1));
            let pa = 0.2 + 0.1 * i as f64;
            for (s, p) in [("a", pa), ("b", 0.5)] {
                let sc = score(&d, s, p, (1.0 - p) / 2.0, (1.0 - p) / 2.0);
                scores.insert(sc.key(), sc);
            }
        }
        let refs = c.texts_for("gold");
        let judged = BTreeSet::new();
        let single = select_all(&scores, &systems, None).unwrap();
        let base = selection_eval(&single, &c, &refs, &fl, &judged).unwrap();
        let folds = assign_folds((0..4).map(|i| format!("d{i}")), 2, 1).unwrap();
        let per_fold: Vec<_> = (0..2).map(|f| scores_for_fold(&scores, &folds, f)).collect();
        let (cv, sel) = crossval_eval(&per_fold, &folds, 2, &systems, &c, &refs, &fl, &judged).unwrap();
        assert_eq!(cv, base);
        assert_eq!(sel, single);

        let leaky = vec![scores.clone(), scores.clone()];
        assert!(matches!(
            crossval_eval(&leaky, &folds, 2, &systems, &c, &refs, &fl, &judged),
            Err(EntailError::FoldLeakage { .. })
        ));
        assert!(matches!(
            crossval_eval(&per_fold[..1], &folds, 2, &systems, &c, &refs, &fl, &judged),
            Err(EntailError::MissingFold(1))
        ));
    }

    #[test]
    fn selection_eval_single_system() {
        let c = small_corpus();
        let fl: BTreeMap<PairKey, DocFlags> = (0..4)
            .map(|i| (PairKey::new(format!("d{i}"), "a"), flags(i == 0)))
            .collect();
        let sels: Vec<SelectionResult> = (0..4)
            .map(|i| SelectionResult {
                doc_id: format!("d{i}"),
                chosen_system: "a".into(),
                chosen_score: 0.5,
                candidates_considered: 1,
            })
            .collect();
        let e = selection_eval(&sels, &c, &c.texts_for("gold"), &fl, &BTreeSet::new()).unwrap();
        assert_eq!(e.pct_faithful, 25.0);
        assert_eq!(e.pct_faithful_or_factual, None);
        assert_eq!(e.rouge.r1.f1, 1.0);
    }
}
