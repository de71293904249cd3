//! Run configuration.
//!
//! A [`RunConfig`] can be read from a TOML file and overlaid with values from
//! the command line. Flags win over the file and the file wins over the
//! built-in defaults, which live in the accessor methods.
//!
//! ```toml
//! summaries = "summaries.jsonl"
//! documents = "documents.jsonl"
//! references = "references.jsonl"
//! annotations = ["annotations.tsv", { path = "factuality.csv", column_map = "factuality.toml" }]
//! entailment_scores = "entailment_scores.tsv"
//! systems = ["ptgen", "tconvs2s", "trans2s", "berts2s"]
//! seed = 7
//! k = 5
//! ```
//!
//! Relative paths in a file are resolved against the file's directory.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use faitheval_core::hallu_stats::UnionRule;
use faitheval_core::qa_eval::MatchRule;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const DEFAULT_REFERENCE_SYSTEM: &str = "gold";
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_F1_THRESHOLD: f64 = 0.5;

/// One annotation table, optionally with a column map for foreign schemas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnnotationSource {
    Path(PathBuf),
    Mapped {
        path: PathBuf,
        column_map: Option<PathBuf>,
    },
}

impl AnnotationSource {
    pub fn path(&self) -> &Path {
        match self {
            AnnotationSource::Path(p) | AnnotationSource::Mapped { path: p, .. } => p,
        }
    }

    pub fn column_map(&self) -> Option<&Path> {
        match self {
            AnnotationSource::Path(_) => None,
            AnnotationSource::Mapped { column_map, .. } => column_map.as_deref(),
        }
    }

    fn with_default_map(self, map: Option<&Path>) -> Self {
        match (self, map) {
            (AnnotationSource::Path(path), Some(m)) => AnnotationSource::Mapped {
                path,
                column_map: Some(m.to_path_buf()),
            },
            (AnnotationSource::Mapped { path, column_map: None }, Some(m)) => AnnotationSource::Mapped {
                path,
                column_map: Some(m.to_path_buf()),
            },
            (other, _) => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnionRuleArg {
    /// Intrinsic flag OR extrinsic flag.
    Flags,
    /// Any word every rater marked, whatever the hallucination type.
    AnyType,
}

impl From<UnionRuleArg> for UnionRule {
    fn from(a: UnionRuleArg) -> Self {
        match a {
            UnionRuleArg::Flags => UnionRule::DocumentFlags,
            UnionRuleArg::AnyType => UnionRule::AnyTypeUnanimous,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchArg {
    Exact,
    TokenF1,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub documents: Option<PathBuf>,
    pub summaries: Option<PathBuf>,
    /// Reference summaries as `doc_id`/`text` records. Without it the
    /// summaries of `reference_system` are used.
    pub references: Option<PathBuf>,
    pub reference_system: Option<String>,
    pub annotations: Vec<AnnotationSource>,
    pub entailment_scores: Option<PathBuf>,
    pub similarity_scores: Option<PathBuf>,
    pub qa_pairs: Option<PathBuf>,
    pub rc_answers: Option<PathBuf>,
    /// Entailment scores per cross-validation fold, in fold order.
    pub fold_scores: Vec<PathBuf>,
    /// `doc_id`/`fold` table as written by `export-finetune`.
    pub folds: Option<PathBuf>,
    pub systems: Option<Vec<String>>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub union_rule: Option<UnionRuleArg>,
    pub per_system: Option<bool>,
    pub match_rule: Option<MatchArg>,
    pub f1_threshold: Option<f64>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.documents,
            &mut self.summaries,
            &mut self.references,
            &mut self.entailment_scores,
            &mut self.similarity_scores,
            &mut self.qa_pairs,
            &mut self.rc_answers,
            &mut self.folds,
            &mut self.out_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        self.fold_scores.iter_mut().for_each(fix);
        for a in &mut self.annotations {
            match a {
                AnnotationSource::Path(p) => fix(p),
                AnnotationSource::Mapped { path, column_map } => {
                    fix(path);
                    if let Some(m) = column_map {
                        fix(m);
                    }
                }
            }
        }
    }

    /// Field-wise overlay where every value set in `top` wins.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        RunConfig {
            documents: top.documents.or(self.documents),
            summaries: top.summaries.or(self.summaries),
            references: top.references.or(self.references),
            reference_system: top.reference_system.or(self.reference_system),
            annotations: vec_or(top.annotations, self.annotations),
            entailment_scores: top.entailment_scores.or(self.entailment_scores),
            similarity_scores: top.similarity_scores.or(self.similarity_scores),
            qa_pairs: top.qa_pairs.or(self.qa_pairs),
            rc_answers: top.rc_answers.or(self.rc_answers),
            fold_scores: vec_or(top.fold_scores, self.fold_scores),
            folds: top.folds.or(self.folds),
            systems: top.systems.or(self.systems),
            out_dir: top.out_dir.or(self.out_dir),
            seed: top.seed.or(self.seed),
            k: top.k.or(self.k),
            union_rule: top.union_rule.or(self.union_rule),
            per_system: top.per_system.or(self.per_system),
            match_rule: top.match_rule.or(self.match_rule),
            f1_threshold: top.f1_threshold.or(self.f1_threshold),
        }
    }

    /// Gives every annotation source without its own column map `map`.
    pub fn apply_column_map(&mut self, map: Option<&Path>) {
        self.annotations = std::mem::take(&mut self.annotations)
            .into_iter()
            .map(|a| a.with_default_map(map))
            .collect();
    }

    /// Checks that every referenced input exists and that values are in range.
    pub fn validate(&self) -> Result<()> {
        let inputs = [
            ("documents", &self.documents),
            ("summaries", &self.summaries),
            ("references", &self.references),
            ("entailment_scores", &self.entailment_scores),
            ("similarity_scores", &self.similarity_scores),
            ("qa_pairs", &self.qa_pairs),
            ("rc_answers", &self.rc_answers),
            ("folds", &self.folds),
        ];
        for (name, path) in inputs {
            if let Some(p) = path {
                require_file(name, p)?;
            }
        }
        for a in &self.annotations {
            require_file("annotations", a.path())?;
            if let Some(m) = a.column_map() {
                require_file("column_map", m)?;
            }
        }
        for p in &self.fold_scores {
            require_file("fold_scores", p)?;
        }
        if let Some(systems) = &self.systems {
            if systems.is_empty() || systems.iter().any(|s| s.trim().is_empty()) {
                return Err(CliError::config("systems list must name at least one system"));
            }
        }
        if self.k.is_some_and(|k| k < 2) {
            return Err(CliError::config("k must be at least 2"));
        }
        if let Some(t) = self.f1_threshold {
            if !(t > 0.0 && t <= 1.0) {
                return Err(CliError::config("f1_threshold must lie in (0, 1]"));
            }
        }
        Ok(())
    }

    pub fn reference_system(&self) -> &str {
        self.reference_system.as_deref().unwrap_or(DEFAULT_REFERENCE_SYSTEM)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn k(&self) -> usize {
        self.k.unwrap_or(DEFAULT_FOLDS)
    }

    pub fn union_rule(&self) -> UnionRule {
        self.union_rule.map(UnionRule::from).unwrap_or_default()
    }

    pub fn per_system(&self) -> bool {
        self.per_system.unwrap_or(false)
    }

    pub fn match_rule(&self) -> MatchRule {
        match self.match_rule.unwrap_or(MatchArg::Exact) {
            MatchArg::Exact => MatchRule::Exact,
            MatchArg::TokenF1 => MatchRule::TokenF1 {
                threshold: self.f1_threshold.unwrap_or(DEFAULT_F1_THRESHOLD),
            },
        }
    }

    pub fn require_summaries(&self) -> Result<&Path> {
        self.summaries
            .as_deref()
            .ok_or_else(|| CliError::config("no summaries file given (--summaries)"))
    }

    pub fn require_documents(&self) -> Result<&Path> {
        self.documents
            .as_deref()
            .ok_or_else(|| CliError::config("no documents file given (--documents)"))
    }

    pub fn require_annotations(&self) -> Result<&[AnnotationSource]> {
        if self.annotations.is_empty() {
            return Err(CliError::config("no annotations file given (--annotations)"));
        }
        Ok(&self.annotations)
    }
}

fn vec_or<T>(top: Vec<T>, base: Vec<T>) -> Vec<T> {
    if top.is_empty() {
        base
    } else {
        top
    }
}

fn require_file(name: &str, path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::config(format!("{name} path {} does not exist", path.display())))
    }
}
