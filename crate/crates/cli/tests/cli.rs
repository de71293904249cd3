use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/small")
}

const INPUTS: [&str; 8] = [
    "--documents",
    "documents.jsonl",
    "--summaries",
    "summaries.jsonl",
    "--references",
    "references.jsonl",
    "--annotations",
    "annotations.tsv",
];

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_faitheval"));
    c.current_dir(fixture());
    for var in ["FAITHEVAL_ENTAIL_URL", "FAITHEVAL_QG_URL", "FAITHEVAL_RC_URL", "FAITHEVAL_PROJECT_TOKEN"] {
        c.env_remove(var);
    }
    c
}

fn raw(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

/// Runs with the fixture inputs and expects success.
fn ok(args: &[&str]) -> String {
    let out = bin().args(args).args(INPUTS).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Rows of a TSV table keyed by their first cell.
fn rows(tsv: &str) -> Vec<Vec<String>> {
    tsv.lines().skip(1).map(|l| l.split('\t').map(str::to_string).collect()).collect()
}

fn row<'a>(table: &'a [Vec<String>], key: &str) -> &'a [String] {
    table.iter().find(|r| r[0] == key).unwrap_or_else(|| panic!("no row {key}"))
}

fn num(cell: &str) -> f64 {
    cell.parse().unwrap_or_else(|_| panic!("not a number: {cell}"))
}

#[test]
fn ingest_reports_inventory_and_writes_canonical_annotations() {
    let dir = tempfile::tempdir().unwrap();
    let canon = dir.path().join("canonical.tsv");
    let out = ok(&["ingest", "--out", canon.to_str().unwrap()]);
    let t = rows(&out);
    assert_eq!(row(&t, "documents")[1], "5");
    assert_eq!(row(&t, "summaries")[1], "10");
    assert_eq!(row(&t, "hallucination_pairs")[1], "10");
    assert_eq!(row(&t, "factuality_pairs")[1], "6");
    assert_eq!(row(&t, "judgments")[1], "18");

    let again = bin()
        .args(["ingest", "--summaries", "summaries.jsonl", "--annotations"])
        .arg(&canon)
        .arg("--out")
        .arg(dir.path().join("again.tsv"))
        .output()
        .unwrap();
    assert!(again.status.success());
    assert_eq!(String::from_utf8(again.stdout).unwrap(), out.replace("documents\t5", "documents\t0"));
    assert_eq!(
        std::fs::read_to_string(&canon).unwrap(),
        std::fs::read_to_string(dir.path().join("again.tsv")).unwrap()
    );
}

#[test]
fn rouge_excludes_the_reference_system_and_honours_filters() {
    let t = rows(&ok(&["rouge"]));
    assert_eq!(t.len(), 2);
    for r in &t {
        let (r1, r2, rl) = (num(&r[1]), num(&r[2]), num(&r[3]));
        assert!(r1 >= r2 && r1 >= rl && r2 > 0.0, "{r:?}");
        assert_eq!(r[1].split('.').nth(1).unwrap().len(), 2);
    }
    let only = rows(&ok(&["rouge", "--system", "tconvs2s"]));
    assert_eq!(only.len(), 1);
    assert_eq!(only[0], row(&t, "tconvs2s"));
}

#[test]
fn rouge_against_its_own_outputs_is_perfect() {
    let out = bin()
        .args(["rouge", "--summaries", "summaries.jsonl", "--reference-system", "berts2s"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let t = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(t.len(), 1);
    assert_eq!(t[0][0], "tconvs2s");
    let solo = bin()
        .args(["rouge", "--summaries", "summaries.jsonl", "--reference-system", "berts2s", "--systems", "berts2s"])
        .output()
        .unwrap();
    let t = rows(&String::from_utf8(solo.stdout).unwrap());
    assert_eq!(&t[0][1..], ["100.00", "100.00", "100.00"]);
}

#[test]
fn hallucination_table_matches_hand_derived_flags() {
    let t = rows(&ok(&["hallu-stats"]));
    assert_eq!(&row(&t, "berts2s")[1..], ["5", "20.0", "40.0", "60.0", "40.0", "60.0"]);
    assert_eq!(&row(&t, "tconvs2s")[1..], ["5", "20.0", "40.0", "40.0", "60.0", "80.0"]);
}

#[test]
fn any_type_rule_flags_mixed_type_agreement() {
    let t = rows(&ok(&["hallu-stats", "--union-rule", "any-type"]));
    assert_eq!(&row(&t, "berts2s")[1..], ["5", "20.0", "40.0", "60.0", "40.0", "60.0"]);
    assert_eq!(&row(&t, "tconvs2s")[1..], ["5", "20.0", "40.0", "60.0", "40.0", "60.0"]);
}

#[test]
fn hallu_stats_extra_tables_are_named_sections() {
    let out = ok(&["hallu-stats", "--span-stats", "--linguistic", "--factual-breakdown"]);
    let names: Vec<&str> = out.lines().filter_map(|l| l.strip_prefix("# ")).collect();
    assert_eq!(names, ["hallucination", "factual_breakdown", "span_stats", "linguistic"]);
    let linguistic = out.split("# linguistic\n").nth(1).unwrap();
    let t = rows(linguistic);
    assert_eq!(&row(&t, "tconvs2s")[2..], ["0.0", "20.0"]);
}

#[test]
fn agreement_lists_defined_kappas() {
    let t = rows(&ok(&["agreement"]));
    for system in ["berts2s", "tconvs2s"] {
        let tasks: Vec<&str> = t.iter().filter(|r| r[0] == system).map(|r| r[1].as_str()).collect();
        assert_eq!(tasks, ["hallucination", "factuality", "repetition", "incoherence"]);
    }
    for r in &t {
        let k = num(&r[2]);
        assert!((-1.0..=1.0).contains(&k));
    }
    let unanimous = t.iter().find(|r| r[0] == "tconvs2s" && r[1] == "incoherence").unwrap();
    assert_eq!(unanimous[2], "1.00");
}

#[test]
fn correlation_orders_faithfulness_above_factuality() {
    let t = rows(&ok(&["correlate", "--scores", "entailment_scores.tsv"]));
    let faithful = num(&t.iter().find(|r| r[1] == "faithful").unwrap()[4]);
    let factual = num(&t.iter().find(|r| r[1] == "factual").unwrap()[4]);
    assert!(faithful > factual && factual > 0.0, "{faithful} {factual}");
    assert_eq!(t[0][3], "10");
}

#[test]
fn correlation_metric_names_kinds_and_undefined_cells() {
    let out = ok(&[
        "correlate",
        "--scores",
        "nli=entailment_scores.tsv",
        "--scores",
        "similarity_scores.tsv",
        "--linguistic",
        "--rouge",
        "--label",
        "faithful",
        "--per-system",
    ]);
    let t = rows(&out);
    let metrics: std::collections::BTreeSet<&str> = t.iter().map(|r| r[0].as_str()).collect();
    let expected = ["incoherence", "nli", "repetition", "rouge1", "rouge2", "rougeL", "similarity"];
    assert_eq!(metrics.into_iter().collect::<Vec<_>>(), expected);
    assert!(t.iter().all(|r| r[1] == "faithful" && r[2] != "all"));
    let repetition = t.iter().find(|r| r[0] == "repetition").unwrap();
    assert_eq!(repetition[4], "—");
}

#[test]
fn correlate_without_metrics_is_a_config_error() {
    let out = bin().args(["correlate"]).args(INPUTS).output().unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn entailment_classes_cover_every_annotated_pair() {
    let t = rows(&ok(&["entail-eval", "--scores", "entailment_scores.tsv"]));
    assert_eq!(t.len(), 2);
    for r in &t {
        assert_eq!(r[1], "5");
        let total: f64 = r[2..].iter().map(|c| num(c)).sum();
        assert!((total - 100.0).abs() < 0.15, "{r:?}");
    }
    assert_eq!(&row(&t, "berts2s")[2..], ["40.0", "20.0", "40.0"]);
}

#[test]
fn entailment_without_annotations_uses_scored_pairs() {
    let out = bin()
        .args(["entail-eval", "--summaries", "summaries.jsonl", "--scores", "entailment_scores.tsv"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(rows(&String::from_utf8(out.stdout).unwrap()), rows(&ok(&["entail-eval", "--scores", "entailment_scores.tsv"])));
}

#[test]
fn entailment_selection_beats_every_single_system() {
    let dir = tempfile::tempdir().unwrap();
    let sel = dir.path().join("selections.tsv");
    let t = rows(&ok(&["select", "--scores", "entailment_scores.tsv", "--selections-out", sel.to_str().unwrap()]));
    let entail = num(&row(&t, "entail")[5]);
    for system in ["berts2s", "tconvs2s"] {
        assert!(entail > num(&row(&t, system)[5]));
    }
    let chosen = rows(&std::fs::read_to_string(&sel).unwrap());
    let systems: Vec<&str> = chosen.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(systems, ["berts2s", "berts2s", "tconvs2s", "tconvs2s", "tconvs2s"]);
}

#[test]
fn single_system_selection_rows_match_rouge_and_hallucination_tables() {
    let sel = rows(&ok(&["select", "--scores", "entailment_scores.tsv"]));
    let rouge = rows(&ok(&["rouge"]));
    let hallu = rows(&ok(&["hallu-stats"]));
    for system in ["berts2s", "tconvs2s"] {
        let s = row(&sel, system);
        assert_eq!(&s[2..5], &row(&rouge, system)[1..]);
        assert_eq!(&s[5..], &row(&hallu, system)[5..]);
    }
}

#[test]
fn finetune_export_writes_disjoint_folds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let t = rows(&ok(&["export-finetune", "--k", "2", "--seed", "3", "--out", d]));
    assert_eq!(t.len(), 2);
    let mut eval_docs = Vec::new();
    for r in &t {
        assert_eq!(num(&r[1]) + num(&r[2]), 10.0);
        let eval = std::fs::read_to_string(dir.path().join(format!("fold{}_eval.tsv", r[0]))).unwrap();
        let train = std::fs::read_to_string(dir.path().join(format!("fold{}_train.tsv", r[0]))).unwrap();
        assert_eq!(eval.lines().next().unwrap(), "doc_id\tsystem_id\tdocument_text\tsummary_text\tlabel");
        let e: std::collections::BTreeSet<String> = rows(&eval).into_iter().map(|r| r[0].clone()).collect();
        let tr: std::collections::BTreeSet<String> = rows(&train).into_iter().map(|r| r[0].clone()).collect();
        assert!(e.is_disjoint(&tr));
        assert!(rows(&eval).iter().all(|r| r[4] == "entailment" || r[4] == "neutral"));
        eval_docs.extend(e);
    }
    eval_docs.sort();
    assert_eq!(eval_docs, ["d1", "d2", "d3", "d4", "d5"]);
    assert_eq!(
        std::fs::read_to_string(dir.path().join("folds.tsv")).unwrap(),
        std::fs::read_to_string(fixture().join("folds.tsv")).unwrap()
    );
}

#[test]
fn export_without_documents_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["export-finetune", "--summaries", "summaries.jsonl", "--annotations", "annotations.tsv", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn crossval_with_per_fold_copies_equals_plain_selection() {
    let sel = rows(&ok(&["select", "--scores", "entailment_scores.tsv"]));
    let cv_args = ["crossval-eval", "--fold-scores", "fold0_scores.tsv", "--fold-scores", "fold1_scores.tsv"];
    let with_file = rows(&ok(&[&cv_args[..], &["--folds", "folds.tsv"]].concat()));
    assert_eq!(with_file.len(), 1);
    assert_eq!(with_file[0][0], "entail_cv");
    assert_eq!(&with_file[0][1..], &row(&sel, "entail")[1..]);
    let seeded = rows(&ok(&[&cv_args[..], &["--seed", "3"]].concat()));
    assert_eq!(seeded, with_file);
}

#[test]
fn crossval_rejects_scores_outside_their_fold() {
    let out = bin()
        .args(["crossval-eval", "--fold-scores", "fold1_scores.tsv", "--fold-scores", "fold0_scores.tsv"])
        .args(["--folds", "folds.tsv"])
        .args(INPUTS)
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("entail_eval"));
}

#[test]
fn crossval_needs_matching_fold_count() {
    let out = bin()
        .args(["crossval-eval", "--fold-scores", "fold0_scores.tsv"])
        .args(INPUTS)
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn qa_round_trip_accuracy_and_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let verdicts = dir.path().join("verdicts.tsv");
    let qa = ["qa-eval", "--qg-file", "qa_pairs.tsv", "--rc-file", "rc_answers.tsv"];
    let exact = rows(&ok(&[&qa[..], &["--verdicts-out", verdicts.to_str().unwrap()]].concat()));
    let v = rows(&std::fs::read_to_string(&verdicts).unwrap());
    assert_eq!(v.len(), 12);
    for r in &exact {
        let mine: Vec<_> = v.iter().filter(|x| x[1] == r[0]).collect();
        let matched = mine.iter().filter(|x| x[6] == "true").count();
        assert_eq!(r[1], mine.len().to_string());
        assert_eq!(num(&r[2]), (1000.0 * matched as f64 / mine.len() as f64).round() / 10.0);
    }
    let lenient = rows(&ok(&[&qa[..], &["--match", "token-f1", "--f1-threshold", "0.01"]].concat()));
    for r in &exact {
        assert!(num(&row(&lenient, &r[0])[2]) >= num(&r[2]));
    }
}

#[test]
fn qa_needs_both_files_or_live_mode() {
    let out = bin().args(["qa-eval", "--qg-file", "qa_pairs.tsv"]).args(INPUTS).output().unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(code(&raw(&["rouge", "--no-such-flag"])), 1);
    assert_eq!(code(&raw(&[])), 1);
    assert_eq!(code(&raw(&["--help"])), 0);
    assert_eq!(code(&raw(&["--version"])), 0);
}

#[test]
fn missing_input_paths_exit_one() {
    let out = bin()
        .args(["hallu-stats", "--summaries", "summaries.jsonl", "--annotations", "nope.tsv"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.tsv"));
    assert_eq!(code(&raw(&["hallu-stats", "--summaries", "summaries.jsonl"])), 1);
    assert_eq!(code(&raw(&["rouge"])), 1);
}

#[test]
fn malformed_data_exits_two_with_module() {
    let dir = tempfile::tempdir().unwrap();
    let scores = std::fs::read_to_string(fixture().join("entailment_scores.tsv")).unwrap();
    let short: String = scores.lines().take(4).map(|l| format!("{l}\n")).collect();
    let path = dir.path().join("short.tsv");
    std::fs::write(&path, short).unwrap();
    let out = bin().args(["entail-eval", "--scores"]).arg(&path).args(INPUTS).output().unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("faitheval: entail_eval:"));

    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "doc_id\tsystem_id\tp_entail\tp_neutral\tp_contradict\nd1\tberts2s\t0.9\t0.9\t0.9\n").unwrap();
    let out = bin().args(["entail-eval", "--scores"]).arg(&bad).args(INPUTS).output().unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn unreachable_scorer_exits_three() {
    let out = bin()
        .env("FAITHEVAL_ENTAIL_URL", "http://127.0.0.1:9")
        .args(["entail-eval", "--live", "--retries", "0", "--timeout", "2", "--no-cache"])
        .args(INPUTS)
        .output()
        .unwrap();
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn live_mode_without_service_url_is_not_a_backend_failure() {
    let out = bin().args(["entail-eval", "--live", "--retries", "0"]).args(INPUTS).output().unwrap();
    assert_ne!(code(&out), 0);
    assert_ne!(code(&out), 3);
}

fn report(dir: &Path, format: &str) -> Output {
    bin()
        .args(["report", "--config", "run.toml", "--format", format, "--out-dir"])
        .arg(dir)
        .output()
        .unwrap()
}

#[test]
fn report_is_deterministic_and_consistent_with_subcommands() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = report(a.path(), "text");
    let second = report(b.path(), "text");
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(first.stdout, second.stdout);
    let mut names: Vec<String> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let expected = [
        "agreement.tsv",
        "correlation.tsv",
        "crossval.tsv",
        "crossval_selections.tsv",
        "entailment.tsv",
        "factual_breakdown.tsv",
        "hallucination.tsv",
        "linguistic.tsv",
        "qa.tsv",
        "qa_verdicts.tsv",
        "rouge.tsv",
        "selection.tsv",
        "selections.tsv",
        "span_stats.tsv",
        "summary.txt",
    ];
    assert_eq!(names, expected);
    for name in &names {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap(),
            "{name} differs between runs"
        );
    }
    assert_eq!(std::fs::read(a.path().join("summary.txt")).unwrap(), first.stdout);

    let read = |n: &str| std::fs::read_to_string(a.path().join(n)).unwrap();
    assert_eq!(read("rouge.tsv"), ok(&["rouge"]));
    assert_eq!(read("hallucination.tsv"), ok(&["hallu-stats"]));
    assert_eq!(read("agreement.tsv"), ok(&["agreement"]));
    assert_eq!(read("entailment.tsv"), ok(&["entail-eval", "--scores", "entailment_scores.tsv"]));
    assert_eq!(read("selection.tsv"), ok(&["select", "--scores", "entailment_scores.tsv"]));
    assert_eq!(
        read("qa.tsv"),
        ok(&["qa-eval", "--qg-file", "qa_pairs.tsv", "--rc-file", "rc_answers.tsv"])
    );
    let sections = ok(&["hallu-stats", "--span-stats", "--linguistic", "--factual-breakdown"]);
    assert!(sections.contains(&read("span_stats.tsv")));
    assert!(sections.contains(&read("factual_breakdown.tsv")));
    let corr = ok(&[
        "correlate",
        "--scores",
        "entailment=entailment_scores.tsv",
        "--scores",
        "similarity=similarity_scores.tsv",
        "--rouge",
        "--qa",
        "--qg-file",
        "qa_pairs.tsv",
        "--rc-file",
        "rc_answers.tsv",
        "--linguistic",
    ]);
    assert_eq!(read("correlation.tsv"), corr);
}

#[test]
fn report_without_annotations_fails_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["report", "--summaries", "summaries.jsonl", "--out-dir"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    assert!(!out_dir.exists());
}

#[test]
fn flags_override_config_and_config_paths_are_relative_to_the_file() {
    let out = Command::new(env!("CARGO_BIN_EXE_faitheval"))
        .current_dir(std::env::temp_dir())
        .args(["hallu-stats", "--config"])
        .arg(fixture().join("run.toml"))
        .args(["--systems", "tconvs2s"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(t.len(), 1);
    assert_eq!(t[0][0], "tconvs2s");

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let base = fixture();
    std::fs::write(
        &cfg,
        format!(
            "summaries = {:?}\nannotations = [{:?}]\nunion_rule = \"any-type\"\nsystems = [\"berts2s\"]\n",
            base.join("summaries.jsonl"),
            base.join("annotations.tsv")
        ),
    )
    .unwrap();
    let from_file = bin().args(["hallu-stats", "--config"]).arg(&cfg).output().unwrap();
    let t = rows(&String::from_utf8(from_file.stdout).unwrap());
    assert_eq!(t.len(), 1);
    let overridden = bin()
        .args(["hallu-stats", "--union-rule", "flags", "--systems", "tconvs2s", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    let t = rows(&String::from_utf8(overridden.stdout).unwrap());
    assert_eq!(&row(&t, "tconvs2s")[4], "40.0");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "summaries = \"s.jsonl\"\ntolerance = 0.5\n").unwrap();
    let out = bin().args(["rouge", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn foreign_factuality_table_merges_through_a_column_map() {
    let dir = tempfile::tempdir().unwrap();
    let canonical = std::fs::read_to_string(fixture().join("annotations.tsv")).unwrap();
    let mut spans = String::new();
    let mut csv = String::from("bbcid,system,worker_id,is_factual\n");
    for (i, line) in canonical.lines().enumerate() {
        let f: Vec<&str> = line.split('\t').collect();
        if i > 0 && f[3] == "factuality" {
            let system = f[1].to_uppercase();
            let verdict = if f[7] == "true" { "yes" } else { "no" };
            csv.push_str(&format!("{},{system},{},{verdict}\n", f[0], f[2]));
        } else {
            spans.push_str(line);
            spans.push('\n');
        }
    }
    std::fs::write(dir.path().join("spans.tsv"), spans).unwrap();
    std::fs::write(dir.path().join("fact.csv"), csv).unwrap();
    std::fs::write(
        dir.path().join("fact.toml"),
        "delimiter = \",\"\ndoc_id = \"bbcid\"\nsystem_id = \"system\"\nannotator_id = \"worker_id\"\n\
         task = \"\"\nlabel = \"\"\nchar_start = \"\"\nchar_end = \"\"\nevidence_note = \"\"\nfixed_task = \"factuality\"\nverdict = \"is_factual\"\n\
         [system_values]\nBERTS2S = \"berts2s\"\nTCONVS2S = \"tconvs2s\"\n",
    )
    .unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "summaries = {:?}\nannotations = [\"spans.tsv\", {{ path = \"fact.csv\", column_map = \"fact.toml\" }}]\n",
            fixture().join("summaries.jsonl")
        ),
    )
    .unwrap();
    let out = bin().args(["hallu-stats", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), ok(&["hallu-stats"]));
}

#[test]
fn serve_hosts_the_api_and_the_ui() {
    let data = tempfile::tempdir().unwrap();
    let mut child = bin()
        .args(["serve", "--port", "0", "--summaries", "summaries.jsonl", "--documents", "documents.jsonl"])
        .args(["--token", "secret", "--data-dir"])
        .arg(data.path())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").expect("address line").to_string();

    let get = |path: &str, token: Option<&str>| {
        let mut s = TcpStream::connect(&addr).unwrap();
        let auth = token.map(|t| format!("Authorization: Bearer {t}\r\n")).unwrap_or_default();
        write!(s, "GET {path} HTTP/1.1\r\nHost: x\r\n{auth}Connection: close\r\n\r\n").unwrap();
        let mut resp = String::new();
        s.read_to_string(&mut resp).unwrap();
        resp
    };
    let index = get("/", None);
    let unauthorised = get("/export", None);
    let export = get("/export", Some("secret"));
    child.kill().unwrap();
    child.wait().unwrap();

    assert!(index.starts_with("HTTP/1.1 200"), "{index}");
    assert!(index.to_lowercase().contains("<html"));
    assert!(unauthorised.starts_with("HTTP/1.1 401"), "{unauthorised}");
    assert!(export.starts_with("HTTP/1.1 200"), "{export}");
    assert!(export.contains("doc_id\tsystem_id\tannotator_id"));
}
