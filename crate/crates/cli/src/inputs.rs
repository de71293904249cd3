//! Loading of the files a [`RunConfig`] points at.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use faitheval_core::corpus::{ingest_annotations, ingest_documents, InputFormat};
use faitheval_core::hallu_stats::{pair_flags, DocFlags};
use faitheval_core::scorer::files::{load_entailment, load_qa_pairs, load_rc_answers};
use faitheval_core::scorer::gateway::{ENTAIL_URL_VAR, QG_URL_VAR, RC_URL_VAR};
use faitheval_core::scorer::{EntailRequest, EntailmentScores, FileScores, Gateway, GatewayConfig, ScoreSource};
use faitheval_core::tsv::Table as RawTable;
use faitheval_core::{AnnotationSet, ColumnMap, Corpus, PairKey, Task};

use crate::config::{AnnotationSource, RunConfig};
use crate::error::{data, score, CliError, Result};
use crate::LiveOptions;

pub fn corpus(cfg: &RunConfig) -> Result<Corpus> {
    Corpus::load(cfg.documents.as_deref(), cfg.require_summaries()?).map_err(data("corpus"))
}

pub fn column_map(path: &Path) -> Result<ColumnMap> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Every configured annotation source merged into one set.
pub fn annotations(cfg: &RunConfig, corpus: &Corpus) -> Result<AnnotationSet> {
    let mut set = AnnotationSet::default();
    for source in cfg.require_annotations()? {
        set.merge(load_source(source, corpus)?).map_err(data("corpus"))?;
    }
    Ok(set)
}

fn load_source(source: &AnnotationSource, corpus: &Corpus) -> Result<AnnotationSet> {
    let map = match source.column_map() {
        Some(p) => column_map(p)?,
        None => ColumnMap::default(),
    };
    ingest_annotations(source.path(), &map, corpus)
        .map_err(|e| data("corpus")(format!("{}: {e}", source.path().display())))
}

/// Reference text per document.
pub fn references(cfg: &RunConfig, corpus: &Corpus) -> Result<BTreeMap<String, String>> {
    if let Some(path) = &cfg.references {
        let docs = ingest_documents(path, InputFormat::from_path(path)).map_err(data("rouge"))?;
        return Ok(docs.into_iter().map(|d| (d.doc_id, d.text)).collect());
    }
    let refs = corpus.texts_for(cfg.reference_system());
    if refs.is_empty() {
        return Err(CliError::config(format!(
            "no references: pass --references or include summaries of system {}",
            cfg.reference_system()
        )));
    }
    Ok(refs)
}

/// Whether references can be resolved without reading more than the corpus.
pub fn has_references(cfg: &RunConfig, corpus: &Corpus) -> bool {
    cfg.references.is_some() || corpus.systems().contains(cfg.reference_system())
}

/// Systems to report: the configured list, or `available`.
pub fn systems(cfg: &RunConfig, available: BTreeSet<String>) -> Vec<String> {
    match &cfg.systems {
        Some(s) => s.clone(),
        None => available.into_iter().collect(),
    }
}

pub fn flags(cfg: &RunConfig, set: &AnnotationSet, corpus: &Corpus) -> Result<BTreeMap<PairKey, DocFlags>> {
    pair_flags(set, corpus, cfg.union_rule()).map_err(data("hallu_stats"))
}

pub fn judged_systems(set: &AnnotationSet) -> BTreeSet<String> {
    set.systems(Task::Factuality)
}

/// Entailment scores from a file, or from the live service for `pairs`.
pub fn entailment(
    path: Option<&Path>,
    live: &LiveOptions,
    corpus: &Corpus,
    pairs: &BTreeSet<PairKey>,
    module: &'static str,
) -> Result<EntailmentScores> {
    if let Some(p) = path {
        return load_entailment(p).map_err(score(module));
    }
    if !live.live {
        return Err(CliError::config("no entailment scores given (--scores or --live)"));
    }
    let requests = pairs
        .iter()
        .map(|pair| {
            let document = corpus
                .document(&pair.doc_id)
                .ok_or_else(|| CliError::config("--live entailment needs --documents"))?;
            Ok(EntailRequest {
                doc_id: pair.doc_id.clone(),
                system_id: pair.system_id.clone(),
                document: document.text.clone(),
                summary: corpus.require_summary(pair).map_err(data(module))?.text.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gateway = live.gateway();
    require_url(gateway.config().entail_url.as_ref(), ENTAIL_URL_VAR)?;
    gateway.entailment(&requests).map_err(score(module))
}

/// Question and answer files, or the live services.
pub fn qa_source(cfg: &RunConfig, live: &LiveOptions) -> Result<Box<dyn ScoreSource>> {
    if live.live {
        let gateway = live.gateway();
        require_url(gateway.config().qg_url.as_ref(), QG_URL_VAR)?;
        require_url(gateway.config().rc_url.as_ref(), RC_URL_VAR)?;
        return Ok(Box::new(gateway));
    }
    let (Some(qg), Some(rc)) = (&cfg.qa_pairs, &cfg.rc_answers) else {
        return Err(CliError::config("qa evaluation needs --qg-file and --rc-file, or --live"));
    };
    Ok(Box::new(FileScores {
        entailment: None,
        qa_pairs: Some(load_qa_pairs(qg).map_err(score("qa_eval"))?),
        rc_answers: Some(load_rc_answers(rc).map_err(score("qa_eval"))?),
    }))
}

fn require_url(url: Option<&String>, var: &str) -> Result<()> {
    match url {
        Some(_) => Ok(()),
        None => Err(CliError::config(format!("--live needs {var}"))),
    }
}

/// `doc_id`/`fold` table.
pub fn folds(path: &Path) -> Result<BTreeMap<String, usize>> {
    let table = RawTable::read_path(path, b'\t').map_err(data("entail_eval"))?;
    let cols = table.columns(["doc_id", "fold"]).map_err(data("entail_eval"))?;
    table
        .rows
        .iter()
        .map(|r| {
            let fold = r.fields[cols["fold"]].trim().parse().map_err(|_| {
                data("entail_eval")(format!("line {}: invalid fold `{}`", r.line, r.fields[cols["fold"]]))
            })?;
            Ok((r.fields[cols["doc_id"]].clone(), fold))
        })
        .collect()
}

impl LiveOptions {
    pub fn gateway(&self) -> Gateway {
        let defaults = GatewayConfig::from_env();
        Gateway::http(GatewayConfig {
            timeout: self.timeout.map_or(defaults.timeout, std::time::Duration::from_secs_f64),
            retries: self.retries.unwrap_or(defaults.retries),
            parallelism: self.parallelism.unwrap_or(defaults.parallelism),
            cache: !self.no_cache,
            ..defaults
        })
    }
}
