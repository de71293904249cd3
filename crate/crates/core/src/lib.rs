//! Measures how faithful abstractive summaries are to their source documents.
//!
//! The crate is organised around a small canonical data model ([`corpus`]) that
//! every other module consumes:
//!
//! - [`rouge`]: reference-based lexical overlap (ROUGE-1/2/L).
//! - [`agreement`]: word-level Fleiss' kappa over rater labels.
//! - [`hallu_stats`]: unanimity aggregation of span annotations and factuality
//!   verdicts into per-system tables.
//! - [`correlation`]: Spearman's rank correlation of metrics with human labels.
//! - [`scorer`]: access to external neural scorers (NLI, question generation,
//!   reading comprehension, embedding similarity) through score files or HTTP.
//! - [`entail_eval`]: entailment class distributions, entailment-based summary
//!   selection, fine-tune export and cross-validated selection.
//! - [`qa_eval`]: question-answering round-trip consistency.

pub mod agreement;
pub mod corpus;
pub mod correlation;
pub mod entail_eval;
pub mod hallu_stats;
pub mod qa_eval;
pub mod rouge;
pub mod scorer;
pub mod tsv;
mod util;

pub use corpus::{
    AnnotationSet, ColumnMap, Corpus, CorpusError, DocumentRecord, JudgmentRecord, PairKey,
    SpanAnnotation, SpanLabel, SummaryRecord, Task, Token, TokenSequence,
};
