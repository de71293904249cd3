//! Event-sourced annotation store.
//!
//! Every state change is an [`Event`] appended to `events.ndjson` in the data
//! directory before it is applied in memory. Opening a store replays the
//! snapshot (if any) and then the log. [`Store::compact`] folds the log into
//! `snapshot.json`.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use faitheval_core::corpus::{tokenize, validate_spans};
use faitheval_core::{AnnotationSet, Corpus, CorpusError, JudgmentRecord, PairKey, SpanLabel, Task};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const LOG_FILE: &str = "events.ndjson";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt event log at line {line}: {message}")]
    CorruptLog { line: usize, message: String },
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error("unknown project {0}")]
    UnknownProject(String),
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("no summary for {0}")]
    UnknownPair(PairKey),
    #[error("{0} has no completed hallucination task with a marked span")]
    FilterViolation(PairKey),
    #[error("{pair} already has a {task_type} task in project {project}")]
    PairInOtherProject {
        pair: PairKey,
        task_type: Task,
        project: String,
    },
    #[error("task {task_id} is not assigned to {annotator_id}")]
    NotAssigned { task_id: String, annotator_id: String },
    #[error("task {task_id} is a {actual} task, not {expected}")]
    WrongTaskType {
        task_id: String,
        expected: Task,
        actual: Task,
    },
    #[error("{annotator_id} already submitted task {task_id}")]
    AlreadySubmitted { task_id: String, annotator_id: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("{annotator_id} annotated {pair} ({task_type}) in more than one exported project; export one project at a time")]
    ExportConflict {
        pair: PairKey,
        task_type: Task,
        annotator_id: String,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanInput {
    pub label: SpanLabel,
    pub char_start: usize,
    pub char_end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    ProjectCreated {
        project: String,
        pilot: bool,
    },
    TaskCreated {
        task_id: String,
        project: String,
        doc_id: String,
        system_id: String,
        task_type: Task,
    },
    Assigned {
        task_id: String,
        annotator_id: String,
        issued_at: u64,
    },
    SpansSubmitted {
        task_id: String,
        annotator_id: String,
        spans: Vec<SpanInput>,
    },
    VerdictSubmitted {
        task_id: String,
        annotator_id: String,
        verdict: bool,
        evidence_note: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct LogEntry {
    seq: u64,
    #[serde(flatten)]
    event: Event,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Open,
    Assigned,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectInfo {
    pub pilot: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub issued_at: u64,
    pub submitted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub verdict: bool,
    pub evidence_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskState {
    pub task_id: String,
    pub project: String,
    pub doc_id: String,
    pub system_id: String,
    pub task_type: Task,
    /// Creation order, used to break assignment ties.
    pub created: u64,
    pub assignments: BTreeMap<String, Assignment>,
    pub spans: BTreeMap<String, Vec<SpanInput>>,
    pub verdicts: BTreeMap<String, Verdict>,
}

impl TaskState {
    pub fn pair(&self) -> PairKey {
        PairKey::new(&self.doc_id, &self.system_id)
    }

    pub fn submissions(&self) -> usize {
        self.assignments.values().filter(|a| a.submitted).count()
    }

    pub fn outstanding(&self) -> usize {
        self.assignments.values().filter(|a| !a.submitted).count()
    }

    pub fn status(&self, raters: usize) -> TaskStatus {
        if self.submissions() >= raters {
            TaskStatus::Done
        } else if self.outstanding() > 0 {
            TaskStatus::Assigned
        } else {
            TaskStatus::Open
        }
    }
}

/// The complete in-memory state; a pure function of the event sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    pub last_seq: u64,
    pub projects: BTreeMap<String, ProjectInfo>,
    pub tasks: BTreeMap<String, TaskState>,
}

impl State {
    fn apply(&mut self, entry: LogEntry) {
        self.last_seq = entry.seq;
        match entry.event {
            Event::ProjectCreated { project, pilot } => {
                self.projects.insert(project, ProjectInfo { pilot });
            }
            Event::TaskCreated {
                task_id,
                project,
                doc_id,
                system_id,
                task_type,
            } => {
                self.tasks.insert(
                    task_id.clone(),
                    TaskState {
                        task_id,
                        project,
                        doc_id,
                        system_id,
                        task_type,
                        created: entry.seq,
                        assignments: BTreeMap::new(),
                        spans: BTreeMap::new(),
                        verdicts: BTreeMap::new(),
                    },
                );
            }
            Event::Assigned {
                task_id,
                annotator_id,
                issued_at,
            } => {
                if let Some(t) = self.tasks.get_mut(&task_id) {
                    t.assignments.insert(
                        annotator_id,
                        Assignment {
                            issued_at,
                            submitted: false,
                        },
                    );
                }
            }
            Event::SpansSubmitted {
                task_id,
                annotator_id,
                spans,
            } => {
                if let Some(t) = self.tasks.get_mut(&task_id) {
                    if let Some(a) = t.assignments.get_mut(&annotator_id) {
                        a.submitted = true;
                    }
                    t.spans.insert(annotator_id, spans);
                }
            }
            Event::VerdictSubmitted {
                task_id,
                annotator_id,
                verdict,
                evidence_note,
            } => {
                if let Some(t) = self.tasks.get_mut(&task_id) {
                    if let Some(a) = t.assignments.get_mut(&annotator_id) {
                        a.submitted = true;
                    }
                    t.verdicts.insert(
                        annotator_id,
                        Verdict {
                            verdict,
                            evidence_note,
                        },
                    );
                }
            }
        }
    }
}

/// Pilot and main projects may share pairs, so a multi-project export can
/// hold two submissions from one rater.
fn export_conflict(e: CorpusError, t: &TaskState) -> StoreError {
    match e {
        CorpusError::DuplicateSubmission { pair, task, annotator_id } => StoreError::ExportConflict {
            pair,
            task_type: task,
            annotator_id,
        },
        other => {
            debug_assert!(false, "stored submission for {} failed validation: {other}", t.task_id);
            StoreError::Corpus(other)
        }
    }
}

/// Deterministic task id of a (project, task type, pair).
pub fn task_id(project: &str, task_type: Task, pair: &PairKey) -> String {
    let mut h = Sha256::new();
    for part in [project, task_type.as_str(), &pair.doc_id, &pair.system_id] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    hex::encode(&h.finalize()[..16])
}

/// What an annotator needs to work on a task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskView {
    pub task_id: String,
    pub project: String,
    pub doc_id: String,
    pub system_id: String,
    pub task_type: Task,
    pub summary: String,
    /// Source article, shown for hallucination and factuality tasks.
    pub document: Option<String>,
    /// Character offsets `[start, end)` of each summary word.
    pub words: Vec<(usize, usize)>,
    pub labels: Vec<SpanLabel>,
    pub status: TaskStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExportOptions {
    pub task_type: Option<Task>,
    pub project: Option<String>,
    pub include_pilot: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Export {
    pub tsv: String,
    /// Exported tasks that do not yet have all their submissions.
    pub incomplete_tasks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreOptions {
    pub annotators_per_item: usize,
    /// fsync the log after every append.
    pub sync: bool,
}

impl Default for StoreOptions {
    fn default() -> Self {
        StoreOptions {
            annotators_per_item: 3,
            sync: true,
        }
    }
}

pub struct Store {
    corpus: Arc<Corpus>,
    dir: PathBuf,
    options: StoreOptions,
    state: RwLock<State>,
    log: Mutex<File>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

fn read_log(path: &Path, state: &mut State) -> Result<(), StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(io_err(path))?;
    let last = lines.len();
    for (i, line) in lines.into_iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LogEntry>(&line) {
            // Entries already folded into the snapshot.
            Ok(entry) if entry.seq <= state.last_seq => {}
            Ok(entry) => state.apply(entry),
            // A torn final write from a crash is dropped.
            Err(_) if i + 1 == last => {}
            Err(e) => {
                return Err(StoreError::CorruptLog {
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(())
}

impl Store {
    /// Opens (or creates) a store in `dir`, replaying snapshot and log.
    pub fn open(dir: &Path, corpus: Arc<Corpus>, options: StoreOptions) -> Result<Self, StoreError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let snap_path = dir.join(SNAPSHOT_FILE);
        let mut state = match fs::read_to_string(&snap_path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| StoreError::CorruptSnapshot(e.to_string()))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => State::default(),
            Err(e) => return Err(io_err(&snap_path)(e)),
        };
        let log_path = dir.join(LOG_FILE);
        read_log(&log_path, &mut state)?;
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(io_err(&log_path))?;
        Ok(Store {
            corpus,
            dir: dir.to_path_buf(),
            options,
            state: RwLock::new(state),
            log: Mutex::new(log),
        })
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn options(&self) -> StoreOptions {
        self.options
    }

    /// A copy of the current state.
    pub fn state(&self) -> State {
        self.state.read().expect("state lock").clone()
    }

    /// Validates against the current state, then appends and applies the
    /// resulting events. All writers serialize on the log lock.
    fn commit<R>(
        &self,
        plan: impl FnOnce(&State) -> Result<(Vec<Event>, R), StoreError>,
    ) -> Result<R, StoreError> {
        let mut log = self.log.lock().expect("log lock");
        let mut state = self.state.write().expect("state lock");
        let (events, result) = plan(&state)?;
        if events.is_empty() {
            return Ok(result);
        }
        let mut seq = state.last_seq;
        let entries: Vec<LogEntry> = events
            .into_iter()
            .map(|event| {
                seq += 1;
                LogEntry { seq, event }
            })
            .collect();
        let mut buf = String::new();
        for e in &entries {
            buf.push_str(&serde_json::to_string(e).expect("event serializes"));
            buf.push('\n');
        }
        let path = self.dir.join(LOG_FILE);
        log.write_all(buf.as_bytes()).map_err(io_err(&path))?;
        log.flush().map_err(io_err(&path))?;
        if self.options.sync {
            log.sync_data().map_err(io_err(&path))?;
        }
        for e in entries {
            state.apply(e);
        }
        Ok(result)
    }

    /// Creates a project; repeating the call is a no-op.
    pub fn create_project(&self, name: &str, pilot: bool) -> Result<ProjectInfo, StoreError> {
        if name.trim().is_empty() {
            return Err(StoreError::InvalidRequest("empty project name".into()));
        }
        self.commit(|state| match state.projects.get(name) {
            Some(p) => Ok((vec![], p.clone())),
            None => Ok((
                vec![Event::ProjectCreated {
                    project: name.to_string(),
                    pilot,
                }],
                ProjectInfo { pilot },
            )),
        })
    }

    fn check_factuality_filter(&self, state: &State, project: &str, pair: &PairKey) -> Result<(), StoreError> {
        let id = task_id(project, Task::Hallucination, pair);
        let marked = state.tasks.get(&id).is_some_and(|t| {
            t.status(self.options.annotators_per_item) == TaskStatus::Done
                && t.spans.values().any(|s| !s.is_empty())
        });
        if marked {
            Ok(())
        } else {
            Err(StoreError::FilterViolation(pair.clone()))
        }
    }

    /// One task per pair. Ids are deterministic, so re-submitting a batch
    /// returns the same ids without creating anything.
    pub fn create_batch(&self, project: &str, pairs: &[PairKey], task_type: Task) -> Result<Vec<String>, StoreError> {
        self.commit(|state| {
            let info = state
                .projects
                .get(project)
                .ok_or_else(|| StoreError::UnknownProject(project.to_string()))?;
            let mut events = Vec::new();
            let mut ids = Vec::with_capacity(pairs.len());
            let mut fresh = std::collections::BTreeSet::new();
            let taken: BTreeMap<PairKey, &str> = if info.pilot {
                BTreeMap::new()
            } else {
                state
                    .tasks
                    .values()
                    .filter(|t| t.task_type == task_type && t.project != project && !state.projects[&t.project].pilot)
                    .map(|t| (t.pair(), t.project.as_str()))
                    .collect()
            };
            for pair in pairs {
                self.corpus.summary(pair).ok_or_else(|| StoreError::UnknownPair(pair.clone()))?;
                if task_type == Task::Factuality {
                    self.check_factuality_filter(state, project, pair)?;
                }
                if let Some(other) = taken.get(pair) {
                    return Err(StoreError::PairInOtherProject {
                        pair: pair.clone(),
                        task_type,
                        project: other.to_string(),
                    });
                }
                let id = task_id(project, task_type, pair);
                if !state.tasks.contains_key(&id) && fresh.insert(id.clone()) {
                    events.push(Event::TaskCreated {
                        task_id: id.clone(),
                        project: project.to_string(),
                        doc_id: pair.doc_id.clone(),
                        system_id: pair.system_id.clone(),
                        task_type,
                    });
                }
                ids.push(id);
            }
            Ok((events, ids))
        })
    }

    fn view(&self, t: &TaskState) -> TaskView {
        let summary = self
            .corpus
            .summary(&t.pair())
            .map(|s| s.text.clone())
            .unwrap_or_default();
        let document = match t.task_type {
            Task::Linguistic => None,
            _ => self.corpus.document(&t.doc_id).map(|d| d.text.clone()),
        };
        TaskView {
            task_id: t.task_id.clone(),
            project: t.project.clone(),
            doc_id: t.doc_id.clone(),
            system_id: t.system_id.clone(),
            task_type: t.task_type,
            words: tokenize(&summary)
                .tokens
                .iter()
                .map(|w| (w.char_start, w.char_end))
                .collect(),
            summary,
            document,
            labels: t.task_type.labels().to_vec(),
            status: t.status(self.options.annotators_per_item),
        }
    }

    /// The annotator's own unfinished task if there is one; otherwise a new
    /// task they have never been given, fewest outstanding assignments first.
    pub fn next_task(
        &self,
        annotator_id: &str,
        task_type: Task,
        project: Option<&str>,
    ) -> Result<Option<TaskView>, StoreError> {
        if annotator_id.trim().is_empty() {
            return Err(StoreError::InvalidRequest("empty annotator id".into()));
        }
        let raters = self.options.annotators_per_item;
        let in_scope = |t: &TaskState| t.task_type == task_type && project.is_none_or(|p| t.project == p);
        self.commit(|state| {
            if let Some(p) = project {
                if !state.projects.contains_key(p) {
                    return Err(StoreError::UnknownProject(p.to_string()));
                }
            }
            let resume = state
                .tasks
                .values()
                .filter(|t| in_scope(t))
                .filter(|t| t.assignments.get(annotator_id).is_some_and(|a| !a.submitted))
                .min_by_key(|t| t.created);
            if let Some(t) = resume {
                return Ok((vec![], Some(self.view(t))));
            }
            let pick = state
                .tasks
                .values()
                .filter(|t| in_scope(t))
                .filter(|t| t.assignments.len() < raters && !t.assignments.contains_key(annotator_id))
                .min_by_key(|t| (t.outstanding(), t.assignments.len(), t.created));
            let Some(t) = pick else {
                return Ok((vec![], None));
            };
            let mut view = self.view(t);
            view.status = TaskStatus::Assigned;
            let event = Event::Assigned {
                task_id: t.task_id.clone(),
                annotator_id: annotator_id.to_string(),
                issued_at: now_ms(),
            };
            Ok((vec![event], Some(view)))
        })
    }

    fn assigned_task<'s>(
        state: &'s State,
        task_id: &str,
        annotator_id: &str,
        expected: &[Task],
    ) -> Result<&'s TaskState, StoreError> {
        let t = state
            .tasks
            .get(task_id)
            .ok_or_else(|| StoreError::UnknownTask(task_id.to_string()))?;
        if !expected.contains(&t.task_type) {
            return Err(StoreError::WrongTaskType {
                task_id: task_id.to_string(),
                expected: expected[0],
                actual: t.task_type,
            });
        }
        match t.assignments.get(annotator_id) {
            None => Err(StoreError::NotAssigned {
                task_id: task_id.to_string(),
                annotator_id: annotator_id.to_string(),
            }),
            Some(a) if a.submitted => Err(StoreError::AlreadySubmitted {
                task_id: task_id.to_string(),
                annotator_id: annotator_id.to_string(),
            }),
            Some(_) => Ok(t),
        }
    }

    /// Records one rater's spans; an empty list means nothing was marked.
    pub fn submit_spans(&self, task_id: &str, annotator_id: &str, spans: &[SpanInput]) -> Result<TaskStatus, StoreError> {
        let raters = self.options.annotators_per_item;
        self.commit(|state| {
            let t = Self::assigned_task(state, task_id, annotator_id, &[Task::Hallucination, Task::Linguistic])?;
            let summary = self.corpus.require_summary(&t.pair())?;
            let tuples: Vec<(SpanLabel, usize, usize)> =
                spans.iter().map(|s| (s.label, s.char_start, s.char_end)).collect();
            validate_spans(&tokenize(&summary.text), &t.pair(), t.task_type, annotator_id, &tuples)?;
            let mut sorted = spans.to_vec();
            sorted.sort_by_key(|s| (s.char_start, s.char_end));
            let done = t.submissions() + 1 >= raters;
            Ok((
                vec![Event::SpansSubmitted {
                    task_id: task_id.to_string(),
                    annotator_id: annotator_id.to_string(),
                    spans: sorted,
                }],
                if done { TaskStatus::Done } else { TaskStatus::Assigned },
            ))
        })
        .map(|s| self.settle_status(task_id, s))
    }

    /// Records a factuality verdict; the evidence note is kept verbatim.
    pub fn submit_verdict(
        &self,
        task_id: &str,
        annotator_id: &str,
        verdict: bool,
        evidence_note: Option<String>,
    ) -> Result<TaskStatus, StoreError> {
        let raters = self.options.annotators_per_item;
        self.commit(|state| {
            let t = Self::assigned_task(state, task_id, annotator_id, &[Task::Factuality])?;
            let done = t.submissions() + 1 >= raters;
            Ok((
                vec![Event::VerdictSubmitted {
                    task_id: task_id.to_string(),
                    annotator_id: annotator_id.to_string(),
                    verdict,
                    evidence_note: evidence_note.filter(|n| !n.is_empty()),
                }],
                if done { TaskStatus::Done } else { TaskStatus::Assigned },
            ))
        })
        .map(|s| self.settle_status(task_id, s))
    }

    fn settle_status(&self, task_id: &str, provisional: TaskStatus) -> TaskStatus {
        self.state
            .read()
            .expect("state lock")
            .tasks
            .get(task_id)
            .map_or(provisional, |t| t.status(self.options.annotators_per_item))
    }

    pub fn task(&self, task_id: &str) -> Option<TaskState> {
        self.state.read().expect("state lock").tasks.get(task_id).cloned()
    }

    /// Canonical annotation TSV of the selected tasks. Pilot projects are
    /// left out unless requested.
    pub fn export(&self, options: &ExportOptions) -> Result<Export, StoreError> {
        let state = self.state.read().expect("state lock");
        if let Some(p) = &options.project {
            if !state.projects.contains_key(p) {
                return Err(StoreError::UnknownProject(p.clone()));
            }
        }
        let mut set = AnnotationSet::new(self.options.annotators_per_item);
        let mut incomplete = 0;
        for t in state.tasks.values() {
            let pilot = state.projects.get(&t.project).is_some_and(|p| p.pilot);
            let selected = options.task_type.is_none_or(|ty| ty == t.task_type)
                && options.project.as_ref().map_or(options.include_pilot || !pilot, |p| *p == t.project);
            if !selected {
                continue;
            }
            if t.status(self.options.annotators_per_item) != TaskStatus::Done {
                incomplete += 1;
            }
            let pair = t.pair();
            for (annotator, spans) in &t.spans {
                let tuples: Vec<(SpanLabel, usize, usize)> =
                    spans.iter().map(|s| (s.label, s.char_start, s.char_end)).collect();
                set.insert_spans(&self.corpus, &pair, t.task_type, annotator, &tuples)
                    .map_err(|e| export_conflict(e, t))?;
            }
            for (annotator, v) in &t.verdicts {
                set.insert_judgment(
                    &self.corpus,
                    JudgmentRecord {
                        doc_id: t.doc_id.clone(),
                        system_id: t.system_id.clone(),
                        annotator_id: annotator.clone(),
                        verdict: v.verdict,
                        evidence_note: v.evidence_note.clone(),
                    },
                )
                .map_err(|e| export_conflict(e, t))?;
            }
        }
        Ok(Export {
            tsv: set.to_canonical_tsv(),
            incomplete_tasks: incomplete,
        })
    }

    /// Writes the current state to the snapshot (atomically, via rename) and
    /// truncates the log.
    pub fn compact(&self) -> Result<(), StoreError> {
        let log = self.log.lock().expect("log lock");
        let state = self.state.read().expect("state lock");
        let snap = self.dir.join(SNAPSHOT_FILE);
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        {
            let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
            f.write_all(serde_json::to_string(&*state).expect("state serializes").as_bytes())
                .map_err(io_err(&tmp))?;
            f.sync_all().map_err(io_err(&tmp))?;
        }
        fs::rename(&tmp, &snap).map_err(io_err(&snap))?;
        // Entries up to the snapshot's sequence number are skipped on replay,
        // so a crash before truncation is harmless.
        log.set_len(0).map_err(io_err(&self.dir.join(LOG_FILE)))?;
        log.sync_all().map_err(io_err(&self.dir.join(LOG_FILE)))?;
        Ok(())
    }
}
