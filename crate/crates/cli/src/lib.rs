//! Command-line front end of the faithfulness toolkit.

pub mod build;
pub mod commands;
pub mod config;
pub mod error;
pub mod inputs;
pub mod report;
pub mod table;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{AnnotationSource, MatchArg, RunConfig, UnionRuleArg};
use error::{CliError, Result};
use table::Table;

#[derive(Debug, Parser)]
#[command(name = "faitheval", version, about = "Hallucination, faithfulness and factuality of abstractive summaries")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Tsv,
    Text,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Tsv)]
    pub format: Format,
    #[arg(long, global = true)]
    pub documents: Option<PathBuf>,
    #[arg(long, global = true)]
    pub summaries: Option<PathBuf>,
    /// Reference summaries (`doc_id`, `text`).
    #[arg(long, global = true)]
    pub references: Option<PathBuf>,
    /// System whose summaries serve as references when --references is absent.
    #[arg(long, global = true)]
    pub reference_system: Option<String>,
    /// Annotation table; may be repeated.
    #[arg(long, global = true)]
    pub annotations: Vec<PathBuf>,
    /// Column map applied to annotation tables that have none.
    #[arg(long, global = true)]
    pub column_map: Option<PathBuf>,
    #[arg(long, global = true, alias = "system", value_delimiter = ',')]
    pub systems: Option<Vec<String>>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub union_rule: Option<UnionRuleArg>,
}

/// Scorer service access for commands that can query live backends.
#[derive(Debug, Clone, Default, Args)]
pub struct LiveOptions {
    /// Query the services named by FAITHEVAL_ENTAIL_URL, FAITHEVAL_QG_URL and FAITHEVAL_RC_URL.
    #[arg(long)]
    pub live: bool,
    /// Per-request timeout in seconds.
    #[arg(long, value_name = "SECONDS")]
    pub timeout: Option<f64>,
    #[arg(long)]
    pub retries: Option<u32>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub no_cache: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate inputs and print an inventory; optionally write canonical annotations.
    Ingest {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corpus ROUGE-1/2/L F1 per system.
    Rouge,
    /// Fleiss' kappa per system and task.
    Agreement,
    /// Hallucination percentages per system.
    HalluStats {
        #[arg(long)]
        span_stats: bool,
        #[arg(long)]
        linguistic: bool,
        #[arg(long)]
        factual_breakdown: bool,
    },
    /// Spearman correlation of automatic metrics with human labels.
    Correlate(CorrelateArgs),
    /// Entailment class distribution per system.
    EntailEval {
        #[arg(long)]
        scores: Option<PathBuf>,
        #[command(flatten)]
        live: LiveOptions,
    },
    /// Entailment-based summary selection.
    Select {
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long)]
        selections_out: Option<PathBuf>,
        #[command(flatten)]
        live: LiveOptions,
    },
    /// Write k-fold fine-tuning data.
    ExportFinetune {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validated entailment selection from per-fold scores.
    CrossvalEval {
        /// Entailment scores of one fold; repeat once per fold in fold order.
        #[arg(long)]
        fold_scores: Vec<PathBuf>,
        /// `doc_id`/`fold` table; folds are assigned from --seed otherwise.
        #[arg(long)]
        folds: Option<PathBuf>,
        #[arg(long)]
        selections_out: Option<PathBuf>,
    },
    /// Question-answering round trip accuracy per system.
    QaEval {
        #[arg(long)]
        qg_file: Option<PathBuf>,
        #[arg(long)]
        rc_file: Option<PathBuf>,
        #[arg(long = "match", value_enum)]
        match_rule: Option<MatchArg>,
        #[arg(long)]
        f1_threshold: Option<f64>,
        #[arg(long)]
        verdicts_out: Option<PathBuf>,
        #[command(flatten)]
        live: LiveOptions,
    },
    /// Run the annotation service.
    Serve(ServeArgs),
    /// Every table the configured inputs allow.
    Report {
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct CorrelateArgs {
    /// Score table as `[NAME=]PATH`; may be repeated.
    #[arg(long)]
    pub scores: Vec<String>,
    /// `faithful` or `factual`; both when absent.
    #[arg(long)]
    pub label: Option<faitheval_core::correlation::LabelKind>,
    /// Add per-pair ROUGE F1 as metrics.
    #[arg(long)]
    pub rouge: bool,
    /// Add per-pair QA consistency from --qg-file and --rc-file.
    #[arg(long)]
    pub qa: bool,
    #[arg(long)]
    pub qg_file: Option<PathBuf>,
    #[arg(long)]
    pub rc_file: Option<PathBuf>,
    /// Add unanimous repetition and incoherence flags as metrics.
    #[arg(long)]
    pub linguistic: bool,
    #[arg(long)]
    pub per_system: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Directory holding the annotation UI bundle.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    /// Project token; falls back to FAITHEVAL_PROJECT_TOKEN.
    #[arg(long)]
    pub token: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub annotators_per_item: usize,
}

impl GlobalArgs {
    fn overrides(&self) -> RunConfig {
        RunConfig {
            documents: self.documents.clone(),
            summaries: self.summaries.clone(),
            references: self.references.clone(),
            reference_system: self.reference_system.clone(),
            annotations: self.annotations.iter().cloned().map(AnnotationSource::Path).collect(),
            systems: self.systems.clone(),
            seed: self.seed,
            union_rule: self.union_rule,
            ..RunConfig::default()
        }
    }
}

impl Command {
    fn overrides(&self) -> RunConfig {
        let mut c = RunConfig::default();
        match self {
            Command::EntailEval { scores, .. } | Command::Select { scores, .. } => {
                c.entailment_scores = scores.clone();
            }
            Command::ExportFinetune { k, .. } => c.k = *k,
            Command::CrossvalEval {
                fold_scores, folds, ..
            } => {
                c.fold_scores = fold_scores.clone();
                c.folds = folds.clone();
            }
            Command::QaEval {
                qg_file,
                rc_file,
                match_rule,
                f1_threshold,
                ..
            } => {
                c.qa_pairs = qg_file.clone();
                c.rc_answers = rc_file.clone();
                c.match_rule = *match_rule;
                c.f1_threshold = *f1_threshold;
            }
            Command::Correlate(a) => {
                c.qa_pairs = a.qg_file.clone();
                c.rc_answers = a.rc_file.clone();
                c.per_system = a.per_system.then_some(true);
            }
            Command::Report { out_dir } => c.out_dir = out_dir.clone(),
            _ => {}
        }
        c
    }
}

/// Effective configuration: file, then global flags, then command flags.
pub fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let base = match &cli.global.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let mut cfg = base.overlay(cli.global.overrides()).overlay(cli.command.overrides());
    cfg.apply_column_map(cli.global.column_map.as_deref());
    cfg.validate()?;
    Ok(cfg)
}

/// Tables as TSV or aligned text; several tables are separated by `# name` lines.
pub fn render(tables: &[Table], format: Format) -> String {
    let body = |t: &Table| match format {
        Format::Tsv => t.to_tsv(),
        Format::Text => t.to_text(),
    };
    match tables {
        [one] => body(one),
        many => many
            .iter()
            .map(|t| format!("# {}\n{}", t.name, body(t)))
            .collect::<Vec<_>>()
            .join("\n"),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { CliError::CONFIG_EXIT } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "faitheval: {e}");
            e.exit_code()
        }
    }
}
