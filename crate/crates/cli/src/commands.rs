use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use faitheval_annotate::{AppState, Store, StoreOptions};
use faitheval_core::correlation::{LabelKind, Pooling};
use faitheval_core::entail_eval::{
    assign_folds, crossval_eval, export_finetune, fold_files, select_all, SelectionResult,
};
use faitheval_core::hallu_stats::DocFlags;
use faitheval_core::qa_eval::{pair_scores, run_roundtrip, QaVerdict};
use faitheval_core::scorer::files::{load_entailment, load_similarity};
use faitheval_core::scorer::EntailmentScores;
use faitheval_core::tsv::Table as RawTable;
use faitheval_core::{AnnotationSet, Corpus, PairKey, Task};

use crate::build::{self, Metric};
use crate::config::RunConfig;
use crate::error::{data, qa, score, CliError, Result};
use crate::table::Table;
use crate::{effective_config, inputs, render, report, Cli, Command, CorrelateArgs, LiveOptions, ServeArgs};

/// Corpus plus merged annotations and the flags derived from them.
pub struct Annotated {
    pub corpus: Corpus,
    pub set: AnnotationSet,
    pub flags: BTreeMap<PairKey, DocFlags>,
    pub judged: BTreeSet<String>,
}

impl Annotated {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        cfg.require_annotations()?;
        let corpus = inputs::corpus(cfg)?;
        let set = inputs::annotations(cfg, &corpus)?;
        let flags = inputs::flags(cfg, &set, &corpus)?;
        let judged = inputs::judged_systems(&set);
        Ok(Annotated {
            corpus,
            set,
            flags,
            judged,
        })
    }

    /// Annotated documents per system, restricted to the configured systems.
    pub fn docs_by_system(&self, cfg: &RunConfig) -> BTreeMap<String, BTreeSet<String>> {
        let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for pair in self.flags.keys().filter(|p| wanted(cfg, &p.system_id)) {
            out.entry(pair.system_id.clone()).or_default().insert(pair.doc_id.clone());
        }
        out
    }

    /// Documents annotated for every one of `systems`.
    pub fn common_docs(&self, systems: &[String]) -> BTreeSet<String> {
        let mut docs: Option<BTreeSet<String>> = None;
        for system in systems {
            let mine: BTreeSet<String> = self
                .flags
                .keys()
                .filter(|p| &p.system_id == system)
                .map(|p| p.doc_id.clone())
                .collect();
            docs = Some(match docs {
                None => mine,
                Some(d) => d.intersection(&mine).cloned().collect(),
            });
        }
        docs.unwrap_or_default()
    }
}

pub fn wanted(cfg: &RunConfig, system: &str) -> bool {
    cfg.systems.as_ref().is_none_or(|s| s.iter().any(|x| x == system))
}

fn system_set(cfg: &RunConfig) -> Option<BTreeSet<String>> {
    cfg.systems.as_ref().map(|s| s.iter().cloned().collect())
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| data("output")(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| data("output")(format!("{}: {e}", path.display())))
}

pub fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = effective_config(cli)?;
    let format = cli.global.format;
    let tables = match &cli.command {
        Command::Ingest { out: path } => vec![ingest(&cfg, path.as_deref())?],
        Command::Rouge => vec![rouge(&cfg)?],
        Command::Agreement => {
            let a = Annotated::load(&cfg)?;
            vec![build::agreement(&a.set, &a.corpus, cfg.systems.as_deref())?]
        }
        Command::HalluStats {
            span_stats,
            linguistic,
            factual_breakdown,
        } => hallu_stats(&cfg, *span_stats, *linguistic, *factual_breakdown)?,
        Command::Correlate(args) => vec![correlate(&cfg, args)?],
        Command::EntailEval { live, .. } => vec![entail_eval(&cfg, live)?],
        Command::Select {
            selections_out, live, ..
        } => {
            let a = Annotated::load(&cfg)?;
            let (table, chosen) = select(&cfg, &a, live)?;
            if let Some(p) = selections_out {
                write_file(p, &build::selections(&chosen).to_tsv())?;
            }
            vec![table]
        }
        Command::ExportFinetune { out: dir, .. } => vec![export(&cfg, dir)?],
        Command::CrossvalEval { selections_out, .. } => {
            let a = Annotated::load(&cfg)?;
            let (table, chosen) = crossval(&cfg, &a)?;
            if let Some(p) = selections_out {
                write_file(p, &build::selections(&chosen).to_tsv())?;
            }
            vec![table]
        }
        Command::QaEval {
            verdicts_out, live, ..
        } => {
            let corpus = inputs::corpus(&cfg)?;
            let verdicts = qa_verdicts(&cfg, &corpus, live)?;
            if let Some(p) = verdicts_out {
                write_file(p, &build::qa_verdicts(&verdicts).to_tsv())?;
            }
            vec![qa_table(&cfg, &verdicts)?]
        }
        Command::Serve(args) => return serve(&cfg, args, out),
        Command::Report { .. } => report::run(&cfg)?,
    };
    out.write_all(render(&tables, format).as_bytes())
        .map_err(data("output"))
}

fn ingest(cfg: &RunConfig, out: Option<&Path>) -> Result<Table> {
    let corpus = inputs::corpus(cfg)?;
    let mut t = Table::new("inventory", &["item", "count"]);
    let mut row = |item: &str, n: usize| t.push(vec![item.to_string(), n.to_string()]);
    row("documents", corpus.documents().count());
    row("summaries", corpus.summaries().count());
    row("systems", corpus.systems().len());
    if cfg.annotations.is_empty() {
        if out.is_some() {
            cfg.require_annotations()?;
        }
        return Ok(t);
    }
    let set = inputs::annotations(cfg, &corpus)?;
    for task in Task::ALL {
        row(&format!("{}_pairs", task.as_str()), set.pairs(task).len());
    }
    row("span_annotations", set.spans().count());
    row("judgments", set.judgments().count());
    if let Some(path) = out {
        write_file(path, &set.to_canonical_tsv())?;
    }
    Ok(t)
}

/// Systems compared against the references: the configured ones, or every
/// corpus system except the reference system.
pub fn rouge_systems(cfg: &RunConfig, corpus: &Corpus) -> Vec<String> {
    let mut available = corpus.systems();
    available.remove(cfg.reference_system());
    inputs::systems(cfg, available)
}

fn rouge(cfg: &RunConfig) -> Result<Table> {
    let corpus = inputs::corpus(cfg)?;
    let refs = inputs::references(cfg, &corpus)?;
    build::rouge(&corpus, &refs, &rouge_systems(cfg, &corpus))
}

fn hallu_stats(cfg: &RunConfig, spans: bool, linguistic: bool, factual: bool) -> Result<Vec<Table>> {
    let a = Annotated::load(cfg)?;
    let filter = cfg.systems.as_deref();
    let mut tables = vec![build::hallucination(&a.flags, &a.judged, filter)];
    if factual {
        tables.push(build::factual(&a.set, &a.corpus, cfg.union_rule(), filter)?);
    }
    if spans {
        tables.push(build::spans(&a.set, &a.corpus, filter)?);
    }
    if linguistic {
        tables.push(build::linguistic(&a.set, &a.corpus, filter)?);
    }
    Ok(tables)
}

/// Reads a score table as a metric, telling entailment from similarity by its header.
pub fn score_metric(name: Option<&str>, path: &Path) -> Result<Metric> {
    let raw = RawTable::read_path(path, b'\t').map_err(data("correlation"))?;
    let (kind, values) = if raw.column("p_entail").is_some() {
        let scores = load_entailment(path).map_err(score("correlation"))?;
        ("entailment", scores.into_iter().map(|(k, s)| (k, s.p_entail)).collect())
    } else {
        ("similarity", load_similarity(path).map_err(score("correlation"))?)
    };
    Ok(Metric::complete(name.unwrap_or(kind), values))
}

/// `[NAME=]PATH`.
fn parse_score_spec(spec: &str) -> (Option<&str>, PathBuf) {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() && !name.contains(['/', '\\']) => (Some(name), PathBuf::from(path)),
        _ => (None, PathBuf::from(spec)),
    }
}

/// Score-file metrics from the configuration.
pub fn configured_score_metrics(cfg: &RunConfig) -> Result<Vec<Metric>> {
    let mut metrics = Vec::new();
    if let Some(p) = &cfg.entailment_scores {
        metrics.push(score_metric(Some("entailment"), p)?);
    }
    if let Some(p) = &cfg.similarity_scores {
        metrics.push(score_metric(Some("similarity"), p)?);
    }
    Ok(metrics)
}

pub fn label_kinds(only: Option<LabelKind>) -> Vec<LabelKind> {
    only.map_or_else(|| vec![LabelKind::Faithful, LabelKind::Factual], |k| vec![k])
}

pub fn pooling(cfg: &RunConfig) -> Pooling {
    if cfg.per_system() {
        Pooling::PerSystem
    } else {
        Pooling::Pooled
    }
}

fn correlate(cfg: &RunConfig, args: &CorrelateArgs) -> Result<Table> {
    let a = Annotated::load(cfg)?;
    let mut metrics = if args.scores.is_empty() {
        configured_score_metrics(cfg)?
    } else {
        args.scores
            .iter()
            .map(|spec| {
                let (name, path) = parse_score_spec(spec);
                if !path.is_file() {
                    return Err(CliError::config(format!("scores path {} does not exist", path.display())));
                }
                score_metric(name, &path)
            })
            .collect::<Result<Vec<_>>>()?
    };
    if args.rouge {
        let refs = inputs::references(cfg, &a.corpus)?;
        let pairs = a.flags.keys().filter(|p| wanted(cfg, &p.system_id)).cloned();
        metrics.extend(build::rouge_metrics(&a.corpus, &refs, pairs, cfg.reference_system())?);
    }
    if args.qa {
        let verdicts = qa_verdicts(cfg, &a.corpus, &LiveOptions::default())?;
        metrics.push(Metric::partial("qa", pair_scores(&verdicts)));
    }
    if args.linguistic {
        metrics.extend(build::linguistic_metrics(&a.set, &a.corpus)?);
    }
    if metrics.is_empty() {
        return Err(CliError::config(
            "nothing to correlate: pass --scores, --rouge, --qa or --linguistic",
        ));
    }
    build::correlation(
        &metrics,
        &a.flags,
        &label_kinds(args.label),
        pooling(cfg),
        cfg.systems.as_deref(),
    )
}

/// Scored systems among the configured ones.
fn scored_systems(cfg: &RunConfig, scores: &EntailmentScores) -> BTreeSet<String> {
    scores
        .keys()
        .map(|k| k.system_id.clone())
        .filter(|s| wanted(cfg, s))
        .collect()
}

fn entail_eval(cfg: &RunConfig, live: &LiveOptions) -> Result<Table> {
    if cfg.annotations.is_empty() {
        let corpus = inputs::corpus(cfg)?;
        let pairs: BTreeSet<PairKey> = corpus
            .summaries()
            .map(|s| s.key())
            .filter(|p| wanted(cfg, &p.system_id))
            .collect();
        let scores = inputs::entailment(cfg.entailment_scores.as_deref(), live, &corpus, &pairs, "entail_eval")?;
        let mut docs: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for k in scores.keys().filter(|k| wanted(cfg, &k.system_id)) {
            docs.entry(k.system_id.clone()).or_default().insert(k.doc_id.clone());
        }
        return build::entailment(&scores, &docs);
    }
    let a = Annotated::load(cfg)?;
    let mut docs = a.docs_by_system(cfg);
    let pairs: BTreeSet<PairKey> = docs
        .iter()
        .flat_map(|(s, ds)| ds.iter().map(move |d| PairKey::new(d, s)))
        .collect();
    let scores = inputs::entailment(cfg.entailment_scores.as_deref(), live, &a.corpus, &pairs, "entail_eval")?;
    if cfg.systems.is_none() {
        let scored = scored_systems(cfg, &scores);
        docs.retain(|s, _| scored.contains(s));
    }
    build::entailment(&scores, &docs)
}

/// Selection table with one row per fixed system and one for entailment
/// selection, plus the entailment choices.
pub fn select(cfg: &RunConfig, a: &Annotated, live: &LiveOptions) -> Result<(Table, Vec<SelectionResult>)> {
    let refs = inputs::references(cfg, &a.corpus)?;
    let (systems, scores) = match &cfg.entailment_scores {
        Some(path) => {
            let scores = load_entailment(path).map_err(score("entail_eval"))?;
            let mut systems = scored_systems(cfg, &scores);
            if cfg.systems.is_none() {
                systems.remove(cfg.reference_system());
            }
            (systems.into_iter().collect::<Vec<_>>(), scores)
        }
        None => {
            let systems = rouge_systems(cfg, &a.corpus);
            let docs = a.common_docs(&systems);
            let pairs = docs
                .iter()
                .flat_map(|d| systems.iter().map(move |s| PairKey::new(d, s)))
                .collect();
            let scores = inputs::entailment(None, live, &a.corpus, &pairs, "entail_eval")?;
            (systems, scores)
        }
    };
    if systems.is_empty() {
        return Err(CliError::config("no systems to select among"));
    }
    let docs = a.common_docs(&systems);
    let mut runs = Vec::new();
    for system in &systems {
        runs.push((system.clone(), build::fixed_choice(system, &docs, &scores)?));
    }
    let chosen = select_all(&scores, &systems, Some(&docs)).map_err(data("entail_eval"))?;
    runs.push(("entail".to_string(), chosen.clone()));
    let table = build::selection("selection", &runs, &a.corpus, &refs, &a.flags, &a.judged)?;
    Ok((table, chosen))
}

fn export(cfg: &RunConfig, dir: &Path) -> Result<Table> {
    cfg.require_documents()?;
    let a = Annotated::load(cfg)?;
    let k = cfg.k();
    let pairs = export_finetune(&a.flags, &a.corpus, k, cfg.seed(), system_set(cfg).as_ref())
        .map_err(data("entail_eval"))?;
    let folds: BTreeMap<&str, usize> = pairs.iter().map(|p| (p.doc_id.as_str(), p.fold)).collect();
    let fold_rows: Vec<Vec<String>> = folds
        .iter()
        .map(|(d, f)| vec![d.to_string(), f.to_string()])
        .collect();
    write_file(
        &dir.join("folds.tsv"),
        &faitheval_core::tsv::write_table(&["doc_id", "fold"], &fold_rows),
    )?;
    let mut t = Table::new("export", &["fold", "train_pairs", "eval_pairs"]);
    for files in fold_files(&pairs, k) {
        write_file(&dir.join(format!("fold{}_train.tsv", files.fold)), &files.train)?;
        write_file(&dir.join(format!("fold{}_eval.tsv", files.fold)), &files.eval)?;
        let eval = pairs.iter().filter(|p| p.fold == files.fold).count();
        t.push(vec![
            files.fold.to_string(),
            (pairs.len() - eval).to_string(),
            eval.to_string(),
        ]);
    }
    Ok(t)
}

/// Cross-validated selection from one score file per fold.
pub fn crossval(cfg: &RunConfig, a: &Annotated) -> Result<(Table, Vec<SelectionResult>)> {
    let k = cfg.fold_scores.len();
    if k < 2 {
        return Err(CliError::config("crossval needs at least two --fold-scores files"));
    }
    if cfg.k.is_some_and(|configured| configured != k) {
        return Err(CliError::config(format!(
            "k = {} but {k} fold score files were given",
            cfg.k()
        )));
    }
    let refs = inputs::references(cfg, &a.corpus)?;
    let fold_scores = cfg
        .fold_scores
        .iter()
        .map(|p| load_entailment(p).map_err(score("entail_eval")))
        .collect::<Result<Vec<_>>>()?;
    let folds = match &cfg.folds {
        Some(p) => inputs::folds(p)?,
        None => {
            let docs = a.flags.keys().filter(|p| wanted(cfg, &p.system_id)).map(|p| p.doc_id.clone());
            assign_folds(docs, k, cfg.seed()).map_err(data("entail_eval"))?
        }
    };
    let mut systems: BTreeSet<String> = fold_scores.iter().flat_map(|s| scored_systems(cfg, s)).collect();
    if cfg.systems.is_none() {
        systems.remove(cfg.reference_system());
    }
    let systems: Vec<String> = systems.into_iter().collect();
    let (eval, chosen) = crossval_eval(&fold_scores, &folds, k, &systems, &a.corpus, &refs, &a.flags, &a.judged)
        .map_err(data("entail_eval"))?;
    let mut t = Table::new("crossval", &build::SELECTION_HEADER);
    t.push(build::selection_row("entail_cv", &eval));
    Ok((t, chosen))
}

pub fn qa_verdicts(cfg: &RunConfig, corpus: &Corpus, live: &LiveOptions) -> Result<Vec<QaVerdict>> {
    if !corpus.has_documents() {
        cfg.require_documents()?;
    }
    let source = inputs::qa_source(cfg, live)?;
    run_roundtrip(corpus, system_set(cfg).as_ref(), source.as_ref(), cfg.match_rule()).map_err(qa("qa_eval"))
}

/// Accuracy of the configured systems, or of every system with questions.
pub fn qa_table(cfg: &RunConfig, verdicts: &[QaVerdict]) -> Result<Table> {
    let present: BTreeSet<String> = verdicts.iter().map(|v| v.system_id.clone()).collect();
    build::qa_accuracy_table(verdicts, &inputs::systems(cfg, present))
}

fn serve(cfg: &RunConfig, args: &ServeArgs, out: &mut dyn Write) -> Result<()> {
    let corpus = Arc::new(inputs::corpus(cfg)?);
    let store = Store::open(
        &args.data_dir,
        corpus,
        StoreOptions {
            annotators_per_item: args.annotators_per_item,
            ..StoreOptions::default()
        },
    )
    .map_err(data("annotate"))?;
    let state = AppState {
        store: Arc::new(store),
        token: args
            .token
            .clone()
            .or_else(|| std::env::var("FAITHEVAL_PROJECT_TOKEN").ok().filter(|t| !t.is_empty())),
        ui_dir: args.ui_dir.clone(),
    };
    let runtime = tokio::runtime::Runtime::new().map_err(data("annotate"))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.bind.as_str(), args.port))
            .await
            .map_err(|e| CliError::config(format!("cannot bind {}:{}: {e}", args.bind, args.port)))?;
        let addr = listener.local_addr().map_err(data("annotate"))?;
        writeln!(out, "listening on http://{addr}")
            .and_then(|()| out.flush())
            .map_err(data("output"))?;
        faitheval_annotate::serve(listener, state).await.map_err(data("annotate"))
    })
}
