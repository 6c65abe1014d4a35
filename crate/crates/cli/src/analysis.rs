//! Scoring and analysis subcommands: evaluate, diagnose, report, replay.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Args;
use ropasum_core::corpus::build_verb_lexicon;
use ropasum_core::diagnostics::{aggregate_ratios, apply_overrides, diagnose_item, CodeRatio, DiagnosisReport, ReviewEntry};
use ropasum_core::experiments::{
    final_row_from_rows, load_ledger, replay_ledger, shot_sweep_from_rows, ExperimentKind, FinalEvalConfig,
    ShotSweepConfig,
};
use ropasum_core::gold::gold_example;
use ropasum_core::metrics::{evaluate_pair, MetricKind, MetricMeans, MetricReport};
use ropasum_core::stats::{se_curve_with, select_shot_count, PoolingMode, ShotSelection, DEFAULT_SE_THRESHOLD};
use serde::{Deserialize, Serialize};

use crate::env::OutDir;
use crate::failure::{invalid, runtime, CliResult, Failure};
use crate::sweeps::{aggregates_path, final_cols, FINAL_COLUMNS};
use crate::GlobalArgs;

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// JSON lines with "reference" and "candidate" fields.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Final-evaluation ledgers (default: every ledger-final-*.jsonl in the output directory).
    #[arg(long)]
    pub ledger: Vec<PathBuf>,
    /// Write side-by-side review entries to review.jsonl.
    #[arg(long)]
    pub review: bool,
    /// Review entries carrying human codes that replace the automatic ones.
    #[arg(long)]
    pub overrides: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Ledgers to report on (default: every ledger-*.jsonl in the output directory).
    #[arg(long)]
    pub ledger: Vec<PathBuf>,
    /// Standard-error threshold for shot selection.
    #[arg(long, default_value_t = DEFAULT_SE_THRESHOLD)]
    pub threshold: f64,
    /// cumulative | within_shot
    #[arg(long, default_value = "cumulative")]
    pub pooling: String,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub ledger: PathBuf,
    /// Recorded aggregates (default: aggregates-<stem>.json beside the ledger).
    #[arg(long)]
    pub aggregates: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct EvalInput {
    reference: String,
    candidate: String,
}

#[derive(Debug, Serialize)]
struct EvalOutput<'a> {
    reference: &'a str,
    candidate: &'a str,
    report: MetricReport,
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Vec<T>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(invalid)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .with_context(|| format!("{}:{}", path.display(), i + 1))
                .map_err(invalid)
        })
        .collect()
}

/// `prefix*.jsonl` files in the output directory, sorted by name.
fn ledgers_in(dir: &Path, prefix: &str) -> CliResult<Vec<PathBuf>> {
    let mut found = Vec::new();
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(_) => return Ok(found),
    };
    for entry in entries {
        let path = entry?.path();
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if name.starts_with(prefix) && name.ends_with(".jsonl") {
            found.push(path);
        }
    }
    found.sort();
    Ok(found)
}

fn ledgers_or_default(given: &[PathBuf], dir: &Path, prefix: &str) -> CliResult<Vec<PathBuf>> {
    let paths = if given.is_empty() { ledgers_in(dir, prefix)? } else { given.to_vec() };
    if paths.is_empty() {
        return Err(invalid(anyhow!("no {prefix}*.jsonl ledgers in {}", dir.display())));
    }
    Ok(paths)
}

fn config_of<T: for<'de> Deserialize<'de>>(path: &Path, value: &serde_json::Value) -> CliResult<T> {
    serde_json::from_value(value.clone())
        .with_context(|| format!("configuration in {}", path.display()))
        .map_err(invalid)
}

pub fn evaluate(g: &GlobalArgs, args: &EvaluateArgs) -> CliResult {
    let pairs: Vec<EvalInput> = read_jsonl(&args.input)?;
    let embedder = g.embedder()?;
    let mut outputs = Vec::with_capacity(pairs.len());
    for p in &pairs {
        let report = evaluate_pair(&p.reference, &p.candidate, embedder.as_ref()).map_err(runtime)?;
        outputs.push(EvalOutput {
            reference: &p.reference,
            candidate: &p.candidate,
            report,
        });
    }
    let means = MetricMeans::of(outputs.iter().map(|o| &o.report));
    for k in MetricKind::ALL {
        println!("{}\t{:.4}", k.name(), means.get(k));
    }
    let mut out = g.out_dir()?;
    out.write_jsonl("evaluate.jsonl", &outputs)?;
    out.write_json("evaluate-means.json", &means)?;
    out.finish()
}

#[derive(Serialize)]
struct RatioRow {
    code: u8,
    name: String,
    count: usize,
    n: usize,
    ratio: f64,
}

fn ratio_rows(ratios: &[CodeRatio]) -> Vec<RatioRow> {
    ratios
        .iter()
        .map(|r| RatioRow {
            code: r.number,
            name: r.code.to_string(),
            count: r.count,
            n: r.n,
            ratio: r.ratio,
        })
        .collect()
}

fn print_ratios(ratios: &[CodeRatio]) {
    for r in ratios {
        println!("{}\t{}\t{}", r.number, r.code, r.render());
    }
}

pub fn diagnose(g: &GlobalArgs, args: &DiagnoseArgs) -> CliResult {
    let corpus = g.load_corpus()?;
    let mut out = g.out_dir()?;
    let lexicon = build_verb_lexicon(&corpus);
    let mut reports: Vec<DiagnosisReport> = Vec::new();
    let mut entries = Vec::new();
    let mut skipped = 0;
    for path in ledgers_or_default(&args.ledger, &g.out_dir, "ledger-final-")? {
        let (header, rows) = load_ledger(&path)?;
        if header.experiment != ExperimentKind::FinalEval {
            return Err(invalid(anyhow!("{} is not a final-evaluation ledger", path.display())));
        }
        for row in rows {
            if row.failed {
                skipped += 1;
                continue;
            }
            let annotation = corpus
                .annotation(&row.item)
                .ok_or_else(|| invalid(anyhow!("{}: item {} not in the corpus", path.display(), row.item)))?;
            let example = gold_example(&corpus, annotation)?;
            let source = corpus.sentence_of(annotation).expect("gold example resolved the sentence");
            let report = diagnose_item(&row.item, &row.response, &example.template, source, &lexicon);
            entries.push(ReviewEntry::new(&example.input, &report));
            reports.push(report);
        }
    }
    if skipped > 0 {
        eprintln!("{skipped} failed rows skipped");
    }
    let ratios = aggregate_ratios(reports.iter().map(|r| &r.codes))?;
    print_ratios(&ratios);
    let non_extractive = reports.iter().filter(|r| r.extractive == Some(false)).count();
    println!("non-extractive\t{non_extractive}/{}", reports.len());
    out.write_jsonl("diagnosis.jsonl", &reports)?;
    out.write_csv("diagnosis-ratios.csv", &ratio_rows(&ratios))?;
    if args.review {
        out.write_jsonl("review.jsonl", &entries)?;
    }
    if let Some(path) = &args.overrides {
        let overrides: Vec<ReviewEntry> = read_jsonl(path)?;
        let applied = apply_overrides(&mut entries, &overrides);
        eprintln!("{applied} human labels applied");
        let reviewed = aggregate_ratios(entries.iter().map(|e| e.effective_codes()))?;
        println!("after review:");
        print_ratios(&reviewed);
        out.write_jsonl("review-applied.jsonl", &entries)?;
        out.write_csv("diagnosis-ratios-reviewed.csv", &ratio_rows(&reviewed))?;
    }
    out.finish()
}

#[derive(Serialize)]
struct BoxplotEntry {
    shots: usize,
    #[serde(flatten)]
    summary: ropasum_core::stats::BoxplotSummary,
}

fn parse_pooling(s: &str) -> CliResult<PoolingMode> {
    match s {
        "cumulative" => Ok(PoolingMode::Cumulative),
        "within_shot" => Ok(PoolingMode::WithinShot),
        _ => Err(invalid(anyhow!("unknown pooling {s:?} (cumulative, within_shot)"))),
    }
}

pub fn report(g: &GlobalArgs, args: &ReportArgs) -> CliResult {
    let pooling = parse_pooling(&args.pooling)?;
    if args.threshold.is_nan() || args.threshold <= 0.0 {
        return Err(invalid(anyhow!("threshold must be positive")));
    }
    let mut out = g.out_dir()?;
    let mut table = Vec::new();
    let mut selection: BTreeMap<String, ShotSelection> = BTreeMap::new();
    for path in ledgers_or_default(&args.ledger, &g.out_dir, "ledger-")? {
        let (header, rows) = load_ledger(&path)?;
        match header.experiment {
            ExperimentKind::ShotSweep => {
                let config: ShotSweepConfig = config_of(&path, &header.config)?;
                let slug = config.category.slug();
                let metric = config.settings.metric;
                let result = shot_sweep_from_rows(&config, &rows);
                let shot_rows: Vec<(Vec<String>, MetricMeans)> = result
                    .shot_means()
                    .into_iter()
                    .enumerate()
                    .map(|(shots, means)| (vec![shots.to_string()], means))
                    .collect();
                out.write_means_csv(&format!("shot-means-{slug}.csv"), &["shots"], &shot_rows)?;
                let boxes: Vec<BoxplotEntry> = result
                    .boxplots(metric)
                    .into_iter()
                    .enumerate()
                    .map(|(shots, summary)| BoxplotEntry { shots, summary })
                    .collect();
                out.write_json(&format!("boxplot-{slug}.json"), &boxes)?;
                let curve = se_curve_with(&result.rep_means(metric), pooling)?;
                out.write_csv(&format!("se-curve-{slug}.csv"), &curve)?;
                let chosen = select_shot_count(&curve, args.threshold)?;
                println!(
                    "{}\t{metric}\tselected {} shots{}",
                    config.category,
                    chosen.shots,
                    if chosen.threshold_met { "" } else { " (threshold not met)" }
                );
                selection.insert(slug.to_string(), chosen);
            }
            ExperimentKind::FinalEval => {
                let config: FinalEvalConfig = config_of(&path, &header.config)?;
                let row = final_row_from_rows(config.category, config.shots, &rows);
                table.push((final_cols(&row), row.means));
            }
            ExperimentKind::PermutationSweep => {
                log::info!("{}: permutation ledgers are summarized by sweep-perms", path.display());
            }
        }
    }
    if !selection.is_empty() {
        out.write_json("selection.json", &selection)?;
    }
    if !table.is_empty() {
        out.write_means_csv("table1.csv", &FINAL_COLUMNS, &table)?;
        let names: Vec<&str> = MetricKind::ALL.iter().map(|k| k.name()).collect();
        println!("category\tshots\t{}", names.join("\t"));
        for (cols, means) in &table {
            let metrics: Vec<String> = MetricKind::ALL.iter().map(|&k| format!("{:.4}", means.get(k))).collect();
            println!("{}\t{}\t{}", cols[0], cols[1], metrics.join("\t"));
        }
    }
    out.finish()
}

pub fn replay(g: &GlobalArgs, args: &ReplayArgs) -> CliResult {
    let embedder = g.embedder()?;
    let (header, _) = load_ledger(&args.ledger)?;
    let recorded_embedder = header.config.get("embedder_id").and_then(|v| v.as_str()).unwrap_or_default();
    if recorded_embedder != embedder.id() {
        return Err(invalid(anyhow!(
            "ledger was scored with embedder {recorded_embedder:?}, not {:?}",
            embedder.id()
        )));
    }
    let (outcome, _) = replay_ledger(&args.ledger, embedder.as_ref())?;
    let aggregates = args.aggregates.clone().unwrap_or_else(|| aggregates_path(&args.ledger));
    let file_matches = match fs::read_to_string(&aggregates) {
        Ok(text) => {
            let recomputed = OutDir::json_text(&outcome.recomputed)?;
            Some(text == recomputed)
        }
        Err(_) => None,
    };
    println!(
        "{} rows, {} rescored differently, {} cells",
        outcome.rows,
        outcome.mismatched_rows.len(),
        outcome.recomputed.len()
    );
    match file_matches {
        Some(true) => println!("aggregates match {}", aggregates.display()),
        Some(false) => println!("aggregates differ from {}", aggregates.display()),
        None => println!("no aggregates file at {}", aggregates.display()),
    }
    if outcome.is_exact() && file_matches != Some(false) {
        println!("replay exact");
        Ok(())
    } else {
        Err(Failure {
            code: crate::failure::INVALID,
            error: anyhow!("replay of {} is not exact", args.ledger.display()),
        })
    }
}
