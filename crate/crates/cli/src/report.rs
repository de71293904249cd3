//! Every table the configured inputs allow, from the same builders the
//! individual subcommands use.

use faitheval_core::qa_eval::pair_scores;
use faitheval_core::Task;

use crate::build::{self, Metric};
use crate::commands::{self, configured_score_metrics, label_kinds, pooling, write_file, Annotated};
use crate::config::RunConfig;
use crate::error::Result;
use crate::table::Table;
use crate::{inputs, render, Format, LiveOptions};

pub const SUMMARY_FILE: &str = "summary.txt";

/// Builds the report, writes it to `out_dir` when configured and returns the
/// summary tables.
pub fn run(cfg: &RunConfig) -> Result<Vec<Table>> {
    cfg.require_annotations()?;
    cfg.require_summaries()?;
    let (summary, details) = build_all(cfg)?;
    if let Some(dir) = &cfg.out_dir {
        for t in summary.iter().chain(&details) {
            write_file(&dir.join(format!("{}.tsv", t.name)), &t.to_tsv())?;
        }
        write_file(&dir.join(SUMMARY_FILE), &render(&summary, Format::Text))?;
    }
    Ok(summary)
}

/// Summary tables and per-item detail tables.
pub fn build_all(cfg: &RunConfig) -> Result<(Vec<Table>, Vec<Table>)> {
    let a = Annotated::load(cfg)?;
    let filter = cfg.systems.as_deref();
    let mut summary = Vec::new();
    let mut details = Vec::new();

    let refs = if inputs::has_references(cfg, &a.corpus) {
        Some(inputs::references(cfg, &a.corpus)?)
    } else {
        None
    };
    if let Some(refs) = &refs {
        summary.push(build::rouge(&a.corpus, refs, &commands::rouge_systems(cfg, &a.corpus))?);
    }
    summary.push(build::hallucination(&a.flags, &a.judged, filter));
    summary.push(build::factual(&a.set, &a.corpus, cfg.union_rule(), filter)?);
    summary.push(build::spans(&a.set, &a.corpus, filter)?);
    let has_linguistic = !a.set.pairs(Task::Linguistic).is_empty();
    if has_linguistic {
        summary.push(build::linguistic(&a.set, &a.corpus, filter)?);
    }
    summary.push(build::agreement(&a.set, &a.corpus, filter)?);

    let live = LiveOptions::default();
    if cfg.entailment_scores.is_some() {
        let file = cfg.entailment_scores.clone();
        let scoped = RunConfig {
            entailment_scores: file,
            ..cfg.clone()
        };
        summary.push(entailment_table(&scoped, &a)?);
    }

    let verdicts = if cfg.qa_pairs.is_some() && cfg.rc_answers.is_some() && a.corpus.has_documents() {
        let v = commands::qa_verdicts(cfg, &a.corpus, &live)?;
        summary.push(commands::qa_table(cfg, &v)?);
        details.push(build::qa_verdicts(&v));
        Some(v)
    } else {
        None
    };

    let mut metrics = configured_score_metrics(cfg)?;
    if let Some(refs) = &refs {
        let pairs = a.flags.keys().filter(|p| commands::wanted(cfg, &p.system_id)).cloned();
        metrics.extend(build::rouge_metrics(&a.corpus, refs, pairs, cfg.reference_system())?);
    }
    if let Some(v) = &verdicts {
        metrics.push(Metric::partial("qa", pair_scores(v)));
    }
    if has_linguistic {
        metrics.extend(build::linguistic_metrics(&a.set, &a.corpus)?);
    }
    if !metrics.is_empty() {
        summary.push(build::correlation(&metrics, &a.flags, &label_kinds(None), pooling(cfg), filter)?);
    }

    if refs.is_some() && cfg.entailment_scores.is_some() {
        let (table, chosen) = commands::select(cfg, &a, &live)?;
        summary.push(table);
        details.push(build::selections(&chosen));
    }
    if refs.is_some() && !cfg.fold_scores.is_empty() {
        let (table, chosen) = commands::crossval(cfg, &a)?;
        summary.push(table);
        let mut t = build::selections(&chosen);
        t.name = "crossval_selections";
        details.push(t);
    }
    Ok((summary, details))
}

fn entailment_table(cfg: &RunConfig, a: &Annotated) -> Result<Table> {
    let scores = faitheval_core::scorer::files::load_entailment(cfg.entailment_scores.as_deref().expect("checked"))
        .map_err(crate::error::score("entail_eval"))?;
    let mut docs = a.docs_by_system(cfg);
    if cfg.systems.is_none() {
        docs.retain(|s, _| scores.keys().any(|k| &k.system_id == s));
    }
    build::entailment(&scores, &docs)
}
