//! `ropasum`: command-line driver for the summarization harness.
//!
//! Exit codes: 0 success, 1 invalid input or failed check, 2 provider or
//! runtime failure.

mod analysis;
mod data;
mod env;
mod failure;
mod sweeps;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use failure::CliResult;

#[derive(Debug, Parser)]
#[command(name = "ropasum", version, about = "Gold rendering, few-shot sweeps and summary scoring")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Corpus JSON file.
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Master seed for splits, example selection, noise and sampling.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// live | echo_gold | corrupt_gold:<p>
    #[arg(long, global = true, default_value = "echo_gold")]
    pub provider: String,
    /// Prompt template JSON file (bundled default when absent).
    #[arg(long, global = true)]
    pub template: Option<PathBuf>,
    /// Response cache file (default: <out-dir>/cache.jsonl).
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 4)]
    pub workers: usize,
    /// Provider calls per minute.
    #[arg(long, global = true)]
    pub rate_limit: Option<u32>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, default_value = "gpt-3.5-turbo")]
    pub model: String,
    /// Chat-completion endpoint for the live provider.
    #[arg(long, global = true, default_value = ropasum_core::llm::http::DEFAULT_CHAT_ENDPOINT)]
    pub endpoint: String,
    #[arg(long, global = true, default_value_t = 0.0)]
    pub temperature: f64,
    #[arg(long, global = true, default_value_t = ropasum_core::llm::DEFAULT_MAX_OUTPUT_UNITS)]
    pub max_output_units: u32,
    /// hash (offline, non-semantic) | remote:<model>
    #[arg(long, global = true, default_value = "hash")]
    pub embedder: String,
    #[arg(long, global = true, default_value = ropasum_core::llm::http::DEFAULT_EMBEDDING_ENDPOINT)]
    pub embedding_endpoint: String,
    /// Dimension of the remote embedding model.
    #[arg(long, global = true, default_value_t = 1536)]
    pub embedding_dimension: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load and validate the corpus; print the per-category census.
    Validate,
    /// Report annotation-guideline findings.
    Lint,
    /// Token-level Cohen's kappa between two annotators.
    Kappa(data::KappaArgs),
    /// Write the train/validation/test split of each category.
    Split(data::CategoryArgs),
    /// Emit gold examples as JSON lines.
    RenderGold(data::RenderGoldArgs),
    /// Shot-count sweep over validation items.
    SweepShots(sweeps::SweepShotsArgs),
    /// Example-order permutation sweep over validation items.
    SweepPerms(sweeps::SweepPermsArgs),
    /// Score one prompt configuration on the test items.
    FinalEval(sweeps::FinalEvalArgs),
    /// Score reference/candidate pairs from a JSON-lines file.
    Evaluate(analysis::EvaluateArgs),
    /// Code discrepancies between generated and gold summaries.
    Diagnose(analysis::DiagnoseArgs),
    /// Tables, box plots, standard-error curves and shot selection.
    Report(analysis::ReportArgs),
    /// Recompute every score and aggregate from a ledger.
    Replay(analysis::ReplayArgs),
    /// Estimate the provider spend of a sweep.
    EstimateCost(sweeps::EstimateCostArgs),
}

fn run(cli: Cli) -> CliResult {
    let g = &cli.global;
    match cli.command {
        Command::Validate => data::validate(g),
        Command::Lint => data::lint(g),
        Command::Kappa(a) => data::kappa(g, &a),
        Command::Split(a) => data::split(g, &a),
        Command::RenderGold(a) => data::render_gold(g, &a),
        Command::SweepShots(a) => sweeps::sweep_shots(g, &a),
        Command::SweepPerms(a) => sweeps::sweep_perms(g, &a),
        Command::FinalEval(a) => sweeps::final_eval(g, &a),
        Command::Evaluate(a) => analysis::evaluate(g, &a),
        Command::Diagnose(a) => analysis::diagnose(g, &a),
        Command::Report(a) => analysis::report(g, &a),
        Command::Replay(a) => analysis::replay(g, &a),
        Command::EstimateCost(a) => sweeps::estimate_cost(g, &a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
