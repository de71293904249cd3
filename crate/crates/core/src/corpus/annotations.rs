use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{tokenize, Corpus, CorpusError, PairKey, TokenSequence};
use crate::tsv::{write_table, Table};

/// Raters per item in the original protocol.
pub const DEFAULT_ANNOTATORS: usize = 3;

/// Column order of the canonical annotations export.
pub const CANONICAL_COLUMNS: [&str; 9] = [
    "doc_id",
    "system_id",
    "annotator_id",
    "task",
    "label",
    "char_start",
    "char_end",
    "verdict",
    "evidence_note",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Hallucination,
    Factuality,
    Linguistic,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Hallucination, Task::Factuality, Task::Linguistic];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Hallucination => "hallucination",
            Task::Factuality => "factuality",
            Task::Linguistic => "linguistic",
        }
    }

    /// Hallucination and linguistic tasks collect spans; factuality collects verdicts.
    pub fn is_span_task(self) -> bool {
        !matches!(self, Task::Factuality)
    }

    pub fn labels(self) -> &'static [SpanLabel] {
        match self {
            Task::Hallucination => &[SpanLabel::Intrinsic, SpanLabel::Extrinsic],
            Task::Linguistic => &[SpanLabel::Repetition, SpanLabel::Incoherence],
            Task::Factuality => &[],
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hallucination" => Ok(Task::Hallucination),
            "factuality" => Ok(Task::Factuality),
            "linguistic" => Ok(Task::Linguistic),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpanLabel {
    Intrinsic,
    Extrinsic,
    Repetition,
    Incoherence,
}

impl SpanLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SpanLabel::Intrinsic => "intrinsic",
            SpanLabel::Extrinsic => "extrinsic",
            SpanLabel::Repetition => "repetition",
            SpanLabel::Incoherence => "incoherence",
        }
    }

    pub fn task(self) -> Task {
        match self {
            SpanLabel::Intrinsic | SpanLabel::Extrinsic => Task::Hallucination,
            SpanLabel::Repetition | SpanLabel::Incoherence => Task::Linguistic,
        }
    }
}

impl fmt::Display for SpanLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpanLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "intrinsic" => Ok(SpanLabel::Intrinsic),
            "extrinsic" => Ok(SpanLabel::Extrinsic),
            "repetition" => Ok(SpanLabel::Repetition),
            "incoherence" => Ok(SpanLabel::Incoherence),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

/// One rater's labeled character span over a summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanAnnotation {
    pub doc_id: String,
    pub system_id: String,
    pub annotator_id: String,
    pub label: SpanLabel,
    pub char_start: usize,
    pub char_end: usize,
}

impl SpanAnnotation {
    pub fn key(&self) -> PairKey {
        PairKey::new(&self.doc_id, &self.system_id)
    }
}

/// One rater's summary-level factuality verdict (`true` = factual).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub doc_id: String,
    pub system_id: String,
    pub annotator_id: String,
    pub verdict: bool,
    pub evidence_note: Option<String>,
}

impl JudgmentRecord {
    pub fn key(&self) -> PairKey {
        PairKey::new(&self.doc_id, &self.system_id)
    }
}

/// Word indices covered by `span` (partial overlap counts the whole word).
pub fn span_to_words(
    span: &SpanAnnotation,
    tokens: &TokenSequence,
) -> Result<BTreeSet<usize>, CorpusError> {
    tokens.words_in(span.char_start, span.char_end)
}

/// Checks one rater's spans over a tokenized summary: labels legal for `task`,
/// offsets in range, pairwise non-overlapping, each covering at least one word.
pub fn validate_spans(
    tokens: &TokenSequence,
    pair: &PairKey,
    task: Task,
    annotator_id: &str,
    spans: &[(SpanLabel, usize, usize)],
) -> Result<(), CorpusError> {
    for &(label, start, end) in spans {
        if label.task() != task {
            return Err(CorpusError::IllegalLabel { label, task });
        }
        if tokens.words_in(start, end)?.is_empty() {
            return Err(CorpusError::SpanCoversNoWord {
                doc_id: pair.doc_id.clone(),
                start,
                end,
            });
        }
    }
    let mut sorted: Vec<(usize, usize)> = spans.iter().map(|&(_, s, e)| (s, e)).collect();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[1].0 < w[0].1) {
        return Err(CorpusError::OverlappingSpans {
            annotator_id: annotator_id.to_string(),
            doc_id: pair.doc_id.clone(),
        });
    }
    Ok(())
}

type SpanSubmissions = BTreeMap<String, Vec<SpanAnnotation>>;

/// All human annotations of a study, keyed by pair, task and rater.
///
/// A rater who submitted a span task without marking anything is still
/// recorded (with an empty span list) so completeness can be checked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationSet {
    annotators_per_item: usize,
    spans: BTreeMap<(PairKey, Task), SpanSubmissions>,
    judgments: BTreeMap<PairKey, BTreeMap<String, JudgmentRecord>>,
}

impl Default for AnnotationSet {
    fn default() -> Self {
        AnnotationSet::new(DEFAULT_ANNOTATORS)
    }
}

impl AnnotationSet {
    pub fn new(annotators_per_item: usize) -> Self {
        AnnotationSet {
            annotators_per_item,
            spans: BTreeMap::new(),
            judgments: BTreeMap::new(),
        }
    }

    pub fn annotators_per_item(&self) -> usize {
        self.annotators_per_item
    }

    /// Records one rater's complete span submission for a span task.
    pub fn insert_spans(
        &mut self,
        corpus: &Corpus,
        pair: &PairKey,
        task: Task,
        annotator_id: &str,
        spans: &[(SpanLabel, usize, usize)],
    ) -> Result<(), CorpusError> {
        let summary = corpus.require_summary(pair)?;
        if !task.is_span_task() {
            if let Some(&(label, ..)) = spans.first() {
                return Err(CorpusError::IllegalLabel { label, task });
            }
        }
        validate_spans(&tokenize(&summary.text), pair, task, annotator_id, spans)?;
        let slot = self.spans.entry((pair.clone(), task)).or_default();
        if slot.contains_key(annotator_id) {
            return Err(CorpusError::DuplicateSubmission {
                pair: pair.clone(),
                task,
                annotator_id: annotator_id.to_string(),
            });
        }
        let mut records: Vec<SpanAnnotation> = spans
            .iter()
            .map(|&(label, char_start, char_end)| SpanAnnotation {
                doc_id: pair.doc_id.clone(),
                system_id: pair.system_id.clone(),
                annotator_id: annotator_id.to_string(),
                label,
                char_start,
                char_end,
            })
            .collect();
        records.sort_by_key(|s| (s.char_start, s.char_end));
        slot.insert(annotator_id.to_string(), records);
        Ok(())
    }

    /// Records a factuality verdict; an empty evidence note is stored as absent.
    pub fn insert_judgment(
        &mut self,
        corpus: &Corpus,
        mut judgment: JudgmentRecord,
    ) -> Result<(), CorpusError> {
        let pair = judgment.key();
        corpus.require_summary(&pair)?;
        if judgment.evidence_note.as_deref().is_some_and(str::is_empty) {
            judgment.evidence_note = None;
        }
        let slot = self.judgments.entry(pair.clone()).or_default();
        if slot.contains_key(&judgment.annotator_id) {
            return Err(CorpusError::DuplicateSubmission {
                pair,
                task: Task::Factuality,
                annotator_id: judgment.annotator_id,
            });
        }
        slot.insert(judgment.annotator_id.clone(), judgment);
        Ok(())
    }

    /// Raters' spans for a pair and span task, keyed by annotator.
    pub fn span_submissions(&self, pair: &PairKey, task: Task) -> Option<&SpanSubmissions> {
        self.spans.get(&(pair.clone(), task))
    }

    pub fn verdicts(&self, pair: &PairKey) -> Option<&BTreeMap<String, JudgmentRecord>> {
        self.judgments.get(pair)
    }

    /// Pairs with at least one submission for `task`.
    pub fn pairs(&self, task: Task) -> BTreeSet<PairKey> {
        if task == Task::Factuality {
            self.judgments.keys().cloned().collect()
        } else {
            self.spans
                .keys()
                .filter(|(_, t)| *t == task)
                .map(|(p, _)| p.clone())
                .collect()
        }
    }

    pub fn systems(&self, task: Task) -> BTreeSet<String> {
        self.pairs(task).into_iter().map(|p| p.system_id).collect()
    }

    pub fn spans(&self) -> impl Iterator<Item = &SpanAnnotation> {
        self.spans.values().flat_map(|m| m.values().flatten())
    }

    pub fn judgments(&self) -> impl Iterator<Item = &JudgmentRecord> {
        self.judgments.values().flat_map(|m| m.values())
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty() && self.judgments.is_empty()
    }

    /// Number of distinct raters who submitted `task` for `pair`.
    pub fn rater_count(&self, pair: &PairKey, task: Task) -> usize {
        if task == Task::Factuality {
            self.judgments.get(pair).map_or(0, BTreeMap::len)
        } else {
            self.span_submissions(pair, task).map_or(0, BTreeMap::len)
        }
    }

    /// Moves every submission of `other` into `self`. A rater who already
    /// submitted the same task for the same pair is a
    /// [`CorpusError::DuplicateSubmission`].
    pub fn merge(&mut self, other: AnnotationSet) -> Result<(), CorpusError> {
        for ((pair, task), subs) in other.spans {
            let slot = self.spans.entry((pair.clone(), task)).or_default();
            for (annotator_id, spans) in subs {
                if slot.contains_key(&annotator_id) {
                    return Err(CorpusError::DuplicateSubmission {
                        pair,
                        task,
                        annotator_id,
                    });
                }
                slot.insert(annotator_id, spans);
            }
        }
        for (pair, subs) in other.judgments {
            let slot = self.judgments.entry(pair.clone()).or_default();
            for (annotator_id, j) in subs {
                if slot.contains_key(&annotator_id) {
                    return Err(CorpusError::DuplicateSubmission {
                        pair,
                        task: Task::Factuality,
                        annotator_id,
                    });
                }
                slot.insert(annotator_id, j);
            }
        }
        Ok(())
    }

    /// Byte-stable tab-separated export with [`CANONICAL_COLUMNS`].
    pub fn to_canonical_tsv(&self) -> String {
        type Row = (PairKey, Task, String, Option<(usize, usize)>, [String; 9]);
        let mut rows: Vec<Row> = Vec::new();
        for ((pair, task), subs) in &self.spans {
            for (annotator, spans) in subs {
                let base = |label: String, s: String, e: String| {
                    [
                        pair.doc_id.clone(),
                        pair.system_id.clone(),
                        annotator.clone(),
                        task.as_str().to_string(),
                        label,
                        s,
                        e,
                        String::new(),
                        String::new(),
                    ]
                };
                if spans.is_empty() {
                    rows.push((
                        pair.clone(),
                        *task,
                        annotator.clone(),
                        None,
                        base(String::new(), String::new(), String::new()),
                    ));
                }
                for span in spans {
                    rows.push((
                        pair.clone(),
                        *task,
                        annotator.clone(),
                        Some((span.char_start, span.char_end)),
                        base(
                            span.label.as_str().to_string(),
                            span.char_start.to_string(),
                            span.char_end.to_string(),
                        ),
                    ));
                }
            }
        }
        for (pair, subs) in &self.judgments {
            for (annotator, j) in subs {
                rows.push((
                    pair.clone(),
                    Task::Factuality,
                    annotator.clone(),
                    None,
                    [
                        pair.doc_id.clone(),
                        pair.system_id.clone(),
                        annotator.clone(),
                        Task::Factuality.as_str().to_string(),
                        String::new(),
                        String::new(),
                        String::new(),
                        j.verdict.to_string(),
                        j.evidence_note.clone().unwrap_or_default(),
                    ],
                ));
            }
        }
        rows.sort_by(|a, b| (&a.0, a.1, &a.2, a.3).cmp(&(&b.0, b.1, &b.2, b.3)));
        let body: Vec<Vec<String>> = rows.into_iter().map(|r| r.4.to_vec()).collect();
        write_table(&CANONICAL_COLUMNS, &body)
    }

    /// Reads a file previously written by [`AnnotationSet::to_canonical_tsv`].
    pub fn read_canonical(path: &Path, corpus: &Corpus) -> Result<Self, CorpusError> {
        ingest_annotations(path, &ColumnMap::default(), corpus)
    }

    pub fn from_canonical_str(text: &str, corpus: &Corpus) -> Result<Self, CorpusError> {
        let map = ColumnMap::default();
        let table = Table::read(text.as_bytes(), map.delimiter_byte()?)?;
        from_table(&table, &map, corpus)
    }
}

/// Maps the columns of an arbitrary annotation table onto annotation fields.
///
/// The default value describes the canonical export. Rows with an empty label
/// (or one listed in `empty_values`) record a rater who marked nothing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    /// Single-character field delimiter.
    pub delimiter: String,
    pub doc_id: String,
    pub system_id: String,
    pub annotator_id: String,
    /// Column holding the task name. An empty name leaves an optional
    /// column unmapped.
    pub task: Option<String>,
    /// Task applied to every row when there is no task column.
    pub fixed_task: Option<Task>,
    pub label: Option<String>,
    pub char_start: Option<String>,
    pub char_end: Option<String>,
    pub verdict: Option<String>,
    pub evidence_note: Option<String>,
    /// Raw label value to label; unmapped values are parsed by name.
    pub label_values: BTreeMap<String, SpanLabel>,
    /// Label values meaning "no span" (compared case-insensitively).
    pub empty_values: Vec<String>,
    pub true_values: Vec<String>,
    pub false_values: Vec<String>,
    /// Raw system name to canonical system id.
    pub system_values: BTreeMap<String, String>,
    /// Subtracted from both offsets (1 for one-based data).
    pub offset_base: usize,
    /// Whether `char_end` points at the last character rather than past it.
    pub end_inclusive: bool,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            delimiter: "\t".into(),
            doc_id: "doc_id".into(),
            system_id: "system_id".into(),
            annotator_id: "annotator_id".into(),
            task: Some("task".into()),
            fixed_task: None,
            label: Some("label".into()),
            char_start: Some("char_start".into()),
            char_end: Some("char_end".into()),
            verdict: Some("verdict".into()),
            evidence_note: Some("evidence_note".into()),
            label_values: BTreeMap::new(),
            empty_values: vec![String::new()],
            true_values: vec!["true".into(), "yes".into(), "1".into()],
            false_values: vec!["false".into(), "no".into(), "0".into()],
            system_values: BTreeMap::new(),
            offset_base: 0,
            end_inclusive: false,
        }
    }
}

impl ColumnMap {
    fn delimiter_byte(&self) -> Result<u8, CorpusError> {
        match self.delimiter.as_bytes() {
            [b] => Ok(*b),
            _ => Err(CorpusError::ColumnMap(format!(
                "delimiter must be one byte, got {:?}",
                self.delimiter
            ))),
        }
    }

    fn is_empty_value(&self, v: &str) -> bool {
        let v = v.trim();
        v.is_empty() || self.empty_values.iter().any(|e| e.eq_ignore_ascii_case(v))
    }

    fn parse_bool(&self, v: &str) -> Option<bool> {
        let v = v.trim();
        if self.true_values.iter().any(|t| t.eq_ignore_ascii_case(v)) {
            Some(true)
        } else if self.false_values.iter().any(|f| f.eq_ignore_ascii_case(v)) {
            Some(false)
        } else {
            None
        }
    }

    fn parse_label(&self, v: &str) -> Option<SpanLabel> {
        self.label_values
            .get(v.trim())
            .copied()
            .or_else(|| v.parse().ok())
    }
}

/// Loads annotations through `column_map`, validating every span against the
/// summaries in `corpus`.
pub fn ingest_annotations(
    path: &Path,
    column_map: &ColumnMap,
    corpus: &Corpus,
) -> Result<AnnotationSet, CorpusError> {
    let table = Table::read_path(path, column_map.delimiter_byte()?)?;
    from_table(&table, column_map, corpus)
}

/// Pair, task and annotator of one span submission.
type SubmissionKey = (PairKey, Task, String);

fn from_table(
    table: &Table,
    map: &ColumnMap,
    corpus: &Corpus,
) -> Result<AnnotationSet, CorpusError> {
    let required = |name: &str| {
        table
            .column(name)
            .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))
    };
    let optional = |name: &Option<String>| -> Result<Option<usize>, CorpusError> {
        name.as_deref().filter(|n| !n.is_empty()).map(required).transpose()
    };
    let doc_col = required(&map.doc_id)?;
    let sys_col = required(&map.system_id)?;
    let ann_col = required(&map.annotator_id)?;
    let task_col = optional(&map.task)?;
    let label_col = optional(&map.label)?;
    let start_col = optional(&map.char_start)?;
    let end_col = optional(&map.char_end)?;
    let verdict_col = optional(&map.verdict)?;
    let note_col = optional(&map.evidence_note)?;
    if label_col.is_some() != (start_col.is_some() && end_col.is_some()) {
        return Err(CorpusError::ColumnMap(
            "label, char_start and char_end must be mapped together".into(),
        ));
    }
    if label_col.is_none() && verdict_col.is_none() {
        return Err(CorpusError::ColumnMap(
            "map either the span columns or the verdict column".into(),
        ));
    }

    let mut groups: BTreeMap<SubmissionKey, Vec<(SpanLabel, usize, usize)>> = BTreeMap::new();
    let mut judgments = Vec::new();
    for row in &table.rows {
        let line = row.line;
        let get = |idx: usize| row.fields[idx].as_str();
        let cell = |idx: Option<usize>| idx.map(get).unwrap_or("");
        let invalid = |column: &str, value: &str| CorpusError::InvalidValue {
            line,
            column: column.to_string(),
            value: value.to_string(),
        };
        let non_empty = |idx: usize, field: &'static str| {
            let v = get(idx).trim();
            if v.is_empty() {
                Err(CorpusError::EmptyField { line, field })
            } else {
                Ok(v.to_string())
            }
        };
        let doc_id = non_empty(doc_col, "doc_id")?;
        let raw_system = non_empty(sys_col, "system_id")?;
        let system_id = map
            .system_values
            .get(&raw_system)
            .cloned()
            .unwrap_or(raw_system);
        let annotator_id = non_empty(ann_col, "annotator_id")?;
        let pair = PairKey::new(doc_id, system_id);

        let raw_label = cell(label_col);
        let label = if map.is_empty_value(raw_label) {
            None
        } else {
            Some(
                map.parse_label(raw_label)
                    .ok_or_else(|| invalid("label", raw_label))?,
            )
        };
        let raw_verdict = cell(verdict_col).trim();
        let task = match task_col.map(get).filter(|t| !t.trim().is_empty()) {
            Some(t) => t.parse::<Task>().map_err(|_| invalid("task", t))?,
            None => match (map.fixed_task, label) {
                (Some(t), _) => t,
                (None, Some(l)) => l.task(),
                (None, None) if !raw_verdict.is_empty() => Task::Factuality,
                (None, None) => {
                    return Err(CorpusError::ColumnMap(format!(
                        "line {line}: cannot infer the task of a row without label or verdict"
                    )))
                }
            },
        };

        if task == Task::Factuality {
            let verdict = map
                .parse_bool(raw_verdict)
                .ok_or_else(|| invalid("verdict", raw_verdict))?;
            let note = cell(note_col);
            judgments.push(JudgmentRecord {
                doc_id: pair.doc_id,
                system_id: pair.system_id,
                annotator_id,
                verdict,
                evidence_note: (!note.is_empty()).then(|| note.to_string()),
            });
            continue;
        }

        let entry = groups.entry((pair, task, annotator_id)).or_default();
        if let Some(label) = label {
            let offset = |idx: Option<usize>, column: &str| -> Result<usize, CorpusError> {
                let raw = cell(idx).trim();
                let v: usize = raw.parse().map_err(|_| invalid(column, raw))?;
                v.checked_sub(map.offset_base)
                    .ok_or_else(|| invalid(column, raw))
            };
            let start = offset(start_col, "char_start")?;
            let mut end = offset(end_col, "char_end")?;
            if map.end_inclusive {
                end += 1;
            }
            entry.push((label, start, end));
        }
    }

    let mut set = AnnotationSet::default();
    for ((pair, task, annotator), spans) in groups {
        set.insert_spans(corpus, &pair, task, &annotator, &spans)?;
    }
    for j in judgments {
        set.insert_judgment(corpus, j)?;
    }
    Ok(set)
}
