use std::path::Path;
use std::sync::Arc;

use faitheval_annotate::{ExportOptions, SpanInput, State, Store, StoreError, StoreOptions};
use faitheval_core::corpus::tokenize;
use faitheval_core::{Corpus, DocumentRecord, PairKey, SpanLabel, SummaryRecord, Task};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SYSTEMS: [&str; 3] = ["berts2s", "ptgen", "gold"];
const ANNOTATORS: [&str; 5] = ["r1", "r2", "r3", "r4", "r5"];
const PROJECTS: [(&str, bool); 3] = [("main", false), ("second", false), ("pilot", true)];

pub fn corpus() -> Arc<Corpus> {
    let docs = (0..6)
        .map(|i| DocumentRecord {
            doc_id: format!("d{i}"),
            text: format!("Source article number {i} about the by-election."),
        })
        .collect();
    let mut sums = Vec::new();
    for i in 0..6 {
        for (j, s) in SYSTEMS.iter().enumerate() {
            sums.push(SummaryRecord {
                doc_id: format!("d{i}"),
                system_id: s.to_string(),
                text: format!("Former London mayor {j} won the seat, it's said in doc {i}."),
            });
        }
    }
    Arc::new(Corpus::new(docs, sums).unwrap())
}

fn random_spans(rng: &mut ChaCha8Rng, text: &str, task: Task) -> Vec<SpanInput> {
    let words = tokenize(text).tokens;
    let mut out = Vec::new();
    let mut i = 0;
    while i < words.len() {
        if rng.random_bool(0.3) {
            let j = (i + rng.random_range(0..3)).min(words.len() - 1);
            let label = *task.labels().choose(rng).unwrap();
            out.push(SpanInput {
                label,
                char_start: words[i].char_start,
                char_end: words[j].char_end,
            });
            i = j + 1;
        }
        i += 1;
    }
    // Occasionally an invalid submission, which must leave no trace.
    if rng.random_bool(0.1) {
        out.push(SpanInput { label: SpanLabel::Intrinsic, char_start: 0, char_end: 3 });
        out.push(SpanInput { label: SpanLabel::Repetition, char_start: 0, char_end: 3 });
    }
    out
}

/// Applies `steps` random operations; errors are part of the sequence.
pub fn random_session(store: &Store, seed: u64, steps: usize, compact: bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corpus = corpus();
    let pairs: Vec<PairKey> = corpus.summaries().map(|s| s.key()).collect();
    for _ in 0..steps {
        let task = *Task::ALL.choose(&mut rng).unwrap();
        let (project, pilot) = *PROJECTS.choose(&mut rng).unwrap();
        match rng.random_range(0..10) {
            0 => {
                let _ = store.create_project(project, pilot);
            }
            1 | 2 => {
                let batch: Vec<PairKey> = pairs.choose_multiple(&mut rng, 4).cloned().collect();
                let _ = store.create_batch(project, &batch, task);
            }
            3..=5 => {
                let who = ANNOTATORS.choose(&mut rng).unwrap();
                let scope = rng.random_bool(0.5).then_some(project);
                let _ = store.next_task(who, task, scope);
            }
            6..=8 => {
                let state = store.state();
                let open: Vec<(String, String, Task, PairKey)> = state
                    .tasks
                    .values()
                    .flat_map(|t| {
                        t.assignments
                            .iter()
                            .filter(|(_, a)| !a.submitted || rng.random_bool(0.05))
                            .map(|(who, _)| (t.task_id.clone(), who.clone(), t.task_type, t.pair()))
                            .collect::<Vec<_>>()
                    })
                    .collect();
                if let Some((id, who, ty, pair)) = open.choose(&mut rng).cloned() {
                    if ty == Task::Factuality {
                        let note = rng.random_bool(0.5).then(|| format!("checked\t\"source\" {}", rng.random::<u16>()));
                        let _ = store.submit_verdict(&id, &who, rng.random_bool(0.5), note);
                    } else {
                        let text = corpus.summary(&pair).unwrap().text.clone();
                        let spans = random_spans(&mut rng, &text, ty);
                        let _ = store.submit_spans(&id, &who, &spans);
                    }
                }
            }
            _ => {
                if compact {
                    store.compact().unwrap();
                }
            }
        }
    }
}

pub fn exports(store: &Store) -> Vec<String> {
    let mut out = Vec::new();
    let scopes = [None, Some("main"), Some("second"), Some("pilot")];
    for task_type in [None, Some(Task::Hallucination), Some(Task::Factuality), Some(Task::Linguistic)] {
        for include_pilot in [false, true] {
            for project in scopes {
                let options = ExportOptions { task_type, project: project.map(str::to_string), include_pilot };
                out.push(match store.export(&options) {
                    Ok(e) => format!("{}\n{}", e.incomplete_tasks, e.tsv),
                    Err(e @ (StoreError::ExportConflict { .. } | StoreError::UnknownProject(_))) => e.to_string(),
                    Err(e) => panic!("export failed: {e}"),
                });
            }
        }
    }
    out
}

fn open(dir: &Path) -> Store {
    Store::open(dir, corpus(), StoreOptions { annotators_per_item: 3, sync: false }).unwrap()
}

/// State with assignment timestamps zeroed, for comparing separate runs.
fn timeless(mut s: State) -> State {
    for t in s.tasks.values_mut() {
        for a in t.assignments.values_mut() {
            a.issued_at = 0;
        }
    }
    s
}

/// Runs one random session twice (with and without compaction) and checks
/// that reopening, replaying the bare log, and compacting all reproduce the
/// same state and byte-identical exports.
pub fn check_replay(seed: u64, steps: usize) -> Vec<String> {
    let compacted = tempfile::tempdir().unwrap();
    let plain = tempfile::tempdir().unwrap();

    let (live_state, live_exports) = {
        let s = open(compacted.path());
        random_session(&s, seed, steps, true);
        (s.state(), exports(&s))
    };
    let reopened = open(compacted.path());
    assert_eq!(reopened.state(), live_state, "seed {seed}: reopen after compaction");
    assert_eq!(exports(&reopened), live_exports, "seed {seed}: export after reopen");

    {
        let s = open(plain.path());
        random_session(&s, seed, steps, false);
        assert_eq!(exports(&s), live_exports, "seed {seed}: same operations without compaction");
    }
    let replayed = open(plain.path());
    assert_eq!(timeless(replayed.state()), timeless(live_state.clone()), "seed {seed}: log replay");
    assert_eq!(exports(&replayed), live_exports, "seed {seed}: export after log replay");
    replayed.compact().unwrap();
    drop(replayed);
    assert_eq!(exports(&open(plain.path())), live_exports, "seed {seed}: export after final compaction");
    live_exports
}
