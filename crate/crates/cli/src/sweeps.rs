//! Experiment subcommands: sweep-shots, sweep-perms, final-eval, estimate-cost.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Args;
use ropasum_core::corpus::Category;
use ropasum_core::experiments::{
    gold_split, load_ledger, run_final_eval, run_permutation_sweep, run_shot_sweep, summarize_cells, FinalEvalConfig,
    FinalEvalRow, Harness, PermutationSweepConfig, RunSettings, ShotSweepConfig,
};
use ropasum_core::metrics::{MetricKind, MetricMeans};
use ropasum_core::prompting::{
    build_prompt, estimate_sweep_cost, factorial, select_examples, PlannedPrompt, PromptError, PromptSpec,
};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::env::{parse_categories, OutDir, Session};
use crate::failure::{invalid, CliResult};
use crate::GlobalArgs;

#[derive(Debug, Args)]
pub struct RunArgs {
    /// goal, step, dp, a comma-separated list, or all.
    #[arg(long, default_value = "all")]
    pub category: String,
    /// Metric used for per-ordering means and shot selection.
    #[arg(long, default_value = "rougeL")]
    pub metric: MetricKind,
    /// Experiment configuration JSON; replaces category and run flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Stop after this many new rows, as if killed.
    #[arg(long, hide = true)]
    pub stop_after: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepShotsArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 10)]
    pub max_shots: usize,
    #[arg(long, default_value_t = 10)]
    pub repetitions: u32,
}

#[derive(Debug, Args)]
pub struct SweepPermsArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Shot count: one number, or per category as goal=7,step=9,dp=6.
    #[arg(long)]
    pub shots: Option<String>,
    /// Score a seeded sample of this many orderings instead of all.
    #[arg(long)]
    pub limit: Option<u64>,
    /// Allow more orderings than the budget guard permits.
    #[arg(long)]
    pub i_know_the_cost: bool,
}

#[derive(Debug, Args)]
pub struct FinalEvalArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Shot count: one number, or per category as goal=7,step=9,dp=6.
    #[arg(long)]
    pub shots: Option<String>,
    /// Example order as comma-separated indices (identity when absent).
    #[arg(long, value_delimiter = ',')]
    pub ordering: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct EstimateCostArgs {
    #[arg(long, default_value = "all")]
    pub category: String,
    /// Price per 1000 units (prompt plus output allowance).
    #[arg(long)]
    pub price_per_1k: f64,
    #[arg(long, default_value_t = 10)]
    pub max_shots: usize,
    #[arg(long, default_value_t = 10)]
    pub repetitions: u32,
    /// Include a permutation sweep with this shot count (same forms as sweep-perms).
    #[arg(long)]
    pub perm_shots: Option<String>,
    #[arg(long)]
    pub perm_limit: Option<u64>,
}

/// `"7"` for every category, or `goal=7,step=9,dp=6`.
pub fn parse_shots(s: &str, categories: &[Category]) -> CliResult<BTreeMap<Category, usize>> {
    if let Ok(k) = s.trim().parse::<usize>() {
        return Ok(categories.iter().map(|&c| (c, k)).collect());
    }
    let mut map = BTreeMap::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (c, k) = part
            .split_once('=')
            .ok_or_else(|| invalid(anyhow!("expected <category>=<shots>, got {part:?}")))?;
        let c: Category = c.trim().parse().map_err(|e: String| invalid(anyhow!(e)))?;
        let k: usize = k
            .trim()
            .parse()
            .map_err(|_| invalid(anyhow!("shot count {k:?} is not a number")))?;
        map.insert(c, k);
    }
    for c in categories {
        if !map.contains_key(c) {
            return Err(invalid(anyhow!("no shot count given for {c}")));
        }
    }
    map.retain(|c, _| categories.contains(c));
    Ok(map)
}

/// `ledger-<stem>.jsonl` pairs with `aggregates-<stem>.json`.
pub fn aggregates_path(ledger: &Path) -> PathBuf {
    let name = ledger.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name.strip_prefix("ledger-").unwrap_or(&name);
    let stem = stem.strip_suffix(".jsonl").unwrap_or(stem);
    ledger.with_file_name(format!("aggregates-{stem}.json"))
}

fn read_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(invalid)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(invalid)
}

/// Fill identity fields left empty in a configuration file.
fn bind_missing(harness: &Harness, settings: &mut RunSettings) {
    let mut bound = settings.clone();
    harness.bind(&mut bound);
    if settings.template_hash.is_empty() {
        settings.template_hash = bound.template_hash;
    }
    if settings.provider_id.is_empty() {
        settings.provider_id = bound.provider_id;
    }
    if settings.embedder_id.is_empty() {
        settings.embedder_id = bound.embedder_id;
    }
}

fn run_settings(g: &GlobalArgs, run: &RunArgs, harness: &Harness) -> RunSettings {
    let mut s = g.settings();
    s.metric = run.metric;
    harness.bind(&mut s);
    s
}

/// Write the row aggregates of a finished ledger next to it.
fn write_aggregates(out: &mut OutDir, ledger: &Path) -> CliResult {
    let (_, rows) = load_ledger(ledger)?;
    let path = aggregates_path(ledger);
    let name = path.file_name().expect("file name").to_string_lossy().into_owned();
    out.register(ledger);
    out.write_json(&name, &summarize_cells(&rows))?;
    Ok(())
}

fn print_means_header() {
    let names: Vec<&str> = MetricKind::ALL.iter().map(|k| k.name()).collect();
    println!("category\tshots\t{}", names.join("\t"));
}

fn print_means(category: Category, shots: usize, m: &MetricMeans) {
    let cols: Vec<String> = MetricKind::ALL.iter().map(|&k| format!("{:.4}", m.get(k))).collect();
    println!("{category}\t{shots}\t{}", cols.join("\t"));
}

pub fn sweep_shots(g: &GlobalArgs, args: &SweepShotsArgs) -> CliResult {
    let mut session = Session::open(g)?;
    let configs: Vec<ShotSweepConfig> = match &args.run.config {
        Some(p) => vec![read_config(p)?],
        None => {
            let settings = run_settings(g, &args.run, &session.harness(g.workers));
            parse_categories(&args.run.category)?
                .into_iter()
                .map(|c| ShotSweepConfig {
                    max_shots: args.max_shots,
                    repetitions: args.repetitions,
                    ..ShotSweepConfig::new(c, settings.clone())
                })
                .collect()
        }
    };
    print_means_header();
    for mut config in configs {
        let mut harness = session.harness(g.workers);
        harness.stop_after = args.run.stop_after;
        bind_missing(&harness, &mut config.settings);
        let split = gold_split(&session.corpus, config.category, config.settings.seed)?;
        let ledger = session.out.path(&format!("ledger-shots-{}.jsonl", config.category.slug()));
        let result = run_shot_sweep(&config, &split, &harness, &ledger)?;
        for (k, m) in result.shot_means().iter().enumerate() {
            print_means(config.category, k, m);
        }
        write_aggregates(&mut session.out, &ledger)?;
    }
    session.out.finish()
}

pub fn sweep_perms(g: &GlobalArgs, args: &SweepPermsArgs) -> CliResult {
    let mut session = Session::open(g)?;
    let configs: Vec<PermutationSweepConfig> = match &args.run.config {
        Some(p) => vec![read_config(p)?],
        None => {
            let settings = run_settings(g, &args.run, &session.harness(g.workers));
            let categories = parse_categories(&args.run.category)?;
            let shots = args
                .shots
                .as_deref()
                .ok_or_else(|| invalid(anyhow!("--shots is required without --config")))?;
            parse_shots(shots, &categories)?
                .into_iter()
                .map(|(category, shots)| PermutationSweepConfig {
                    category,
                    shots,
                    limit: args.limit,
                    settings: settings.clone(),
                })
                .collect()
        }
    };
    println!("category\tshots\torderings\tmin\tq1\tmedian\tq3\tmax\tmean\tvariance");
    for mut config in configs {
        let mut harness = session.harness(g.workers);
        harness.stop_after = args.run.stop_after;
        bind_missing(&harness, &mut config.settings);
        let split = gold_split(&session.corpus, config.category, config.settings.seed)?;
        let stem = format!("perms-{}-k{}", config.category.slug(), config.shots);
        let ledger = session.out.path(&format!("ledger-{stem}.jsonl"));
        let result = run_permutation_sweep(&config, &split, &harness, &ledger, args.i_know_the_cost)?;
        let s = &result.summary;
        println!(
            "{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.6}",
            config.category, config.shots, s.n, s.min, s.q1, s.median, s.q3, s.max, s.mean, s.variance
        );
        session.out.write_csv(&format!("{stem}.csv"), &perm_rows(&result.results))?;
        session.out.write_json(&format!("summary-{stem}.json"), &s)?;
        write_aggregates(&mut session.out, &ledger)?;
    }
    session.out.finish()
}

#[derive(Serialize)]
struct PermRow {
    index: u64,
    ordering: String,
    mean: f64,
    failed: usize,
}

fn perm_rows(results: &[ropasum_core::experiments::PermutationResult]) -> Vec<PermRow> {
    results
        .iter()
        .map(|r| PermRow {
            index: r.index,
            ordering: r.ordering.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "),
            mean: r.mean,
            failed: r.failed,
        })
        .collect()
}

pub const FINAL_COLUMNS: [&str; 4] = ["category", "shots", "items", "failed"];

pub fn final_cols(row: &FinalEvalRow) -> Vec<String> {
    vec![
        row.category.to_string(),
        row.shots.to_string(),
        row.items.to_string(),
        row.failed.to_string(),
    ]
}

pub fn final_eval(g: &GlobalArgs, args: &FinalEvalArgs) -> CliResult {
    let mut session = Session::open(g)?;
    let configs: Vec<FinalEvalConfig> = match &args.run.config {
        Some(p) => vec![read_config(p)?],
        None => {
            let settings = run_settings(g, &args.run, &session.harness(g.workers));
            let categories = parse_categories(&args.run.category)?;
            let shots = args
                .shots
                .as_deref()
                .ok_or_else(|| invalid(anyhow!("--shots is required without --config")))?;
            parse_shots(shots, &categories)?
                .into_iter()
                .map(|(category, shots)| FinalEvalConfig {
                    category,
                    shots,
                    ordering: args.ordering.clone(),
                    settings: settings.clone(),
                })
                .collect()
        }
    };
    print_means_header();
    let mut table = Vec::new();
    for mut config in configs {
        let mut harness = session.harness(g.workers);
        harness.stop_after = args.run.stop_after;
        bind_missing(&harness, &mut config.settings);
        let split = gold_split(&session.corpus, config.category, config.settings.seed)?;
        let ledger = session.out.path(&format!("ledger-final-{}.jsonl", config.category.slug()));
        let row = run_final_eval(&config, &split, &harness, &ledger)?;
        print_means(row.category, row.shots, &row.means);
        if row.failed > 0 {
            eprintln!("{}: {} of {} items failed and scored 0", row.category, row.failed, row.items);
        }
        write_aggregates(&mut session.out, &ledger)?;
        table.push((final_cols(&row), row.means));
    }
    session.out.write_means_csv("final-eval.csv", &FINAL_COLUMNS, &table)?;
    session.out.finish()
}

pub fn estimate_cost(g: &GlobalArgs, args: &EstimateCostArgs) -> CliResult {
    let corpus = g.load_corpus()?;
    let template = g.template()?;
    let categories = parse_categories(&args.category)?;
    let perm_shots = match &args.perm_shots {
        Some(s) => parse_shots(s, &categories)?,
        None => BTreeMap::new(),
    };
    let mut planned = Vec::new();
    for &category in &categories {
        let split = gold_split(&corpus, category, g.seed)?;
        let prompt = |examples, target: &str| -> Result<String, PromptError> {
            Ok(build_prompt(&PromptSpec::new(template.clone(), examples, target)?))
        };
        let examples = select_examples(&split, args.max_shots, g.seed)?;
        for k in 0..=args.max_shots {
            for target in &split.validation {
                planned.push(PlannedPrompt {
                    dataset: format!("{}/shots", category.slug()),
                    prompt: prompt(examples.prefix(k), &target.input)?,
                    calls: u64::from(args.repetitions),
                });
            }
        }
        if let Some(&k) = perm_shots.get(&category) {
            let total = factorial(k).ok_or(PromptError::PermutationSize(k))?;
            let orderings = args.perm_limit.map_or(total, |l| l.min(total));
            // Every ordering of the same examples has the same length.
            let examples = select_examples(&split, k, g.seed)?;
            for target in &split.validation {
                planned.push(PlannedPrompt {
                    dataset: format!("{}/perms-k{k}", category.slug()),
                    prompt: prompt(examples.clone(), &target.input)?,
                    calls: orderings,
                });
            }
        }
    }
    let estimate = estimate_sweep_cost(&planned, u64::from(g.max_output_units), args.price_per_1k)?;
    println!("dataset\tcalls\tunits\tcost");
    for (name, d) in &estimate.per_dataset {
        println!("{name}\t{}\t{}\t{:.2}", d.calls, d.units, d.cost);
    }
    println!("total\t\t{}\t{:.2}", estimate.total_units, estimate.total_cost);
    let mut out = g.out_dir()?;
    out.write_json("cost-estimate.json", &estimate)?;
    out.finish()
}
