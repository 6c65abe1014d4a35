//! Shot sweeps, permutation sweeps and final test-set evaluation.
//!
//! Every experiment expands into work units (one provider call plus scoring
//! each), runs them on a pool of worker threads, and records one ledger row
//! per unit. Rows reach the ledger in canonical unit order regardless of
//! completion order, so an interrupted run leaves a prefix of the clean run's
//! ledger and a rerun only performs the missing calls. All aggregates are
//! computed from ledger rows.

mod ledger;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use crate::corpus::{split_dataset, Category, Corpus, CorpusError, DatasetSplit, ItemRef};
use crate::gold::{gold_example, GoldError, GoldExample};
use crate::hashing::json_hash;
use crate::llm::{ChatRequest, LlmClient, LlmError, ResponseCache, DEFAULT_MAX_OUTPUT_UNITS};
use crate::metrics::{evaluate_pair, EmbeddingProvider, MetricKind, MetricMeans, MetricReport};
use crate::prompting::{
    build_prompt, enumerate_permutations, factorial, select_examples, ExampleSet, PromptError, PromptSpec,
    PromptTemplate, EXAMPLE_POOL_SIZE,
};
use crate::stats::{boxplot_summary, BoxplotSummary, StreamingStats};

pub use ledger::{load_ledger, ExperimentKind, Ledger, LedgerError, LedgerHeader, LedgerRow, RowKey};

/// Orderings above this count need an explicit override.
pub const PERMUTATION_BUDGET: u64 = 50_000;

const PERMUTATION_BATCH: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("provider failure: {0}")]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Gold(#[from] GoldError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{orderings} orderings exceed the budget of {budget}; pass a limit or override the guard")]
    BudgetExceeded { orderings: u64, budget: u64 },
    #[error("stopped after writing {written} rows")]
    Interrupted { written: usize },
}

/// Gold examples of one category, split train/validation/test.
pub fn gold_split(corpus: &Corpus, category: Category, seed: u64) -> Result<DatasetSplit<GoldExample>, ExperimentError> {
    let split = split_dataset(corpus, category, seed)?;
    Ok(split.try_map(|a| gold_example(corpus, a))?)
}

/// Settings shared by all experiments. `template_hash`, `provider_id` and
/// `embedder_id` are filled in by [`Harness::bind`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub seed: u64,
    pub model_id: String,
    pub temperature: f64,
    pub max_output_units: u32,
    pub metric: MetricKind,
    #[serde(default)]
    pub template_hash: String,
    #[serde(default)]
    pub provider_id: String,
    #[serde(default)]
    pub embedder_id: String,
}

impl RunSettings {
    pub fn new(seed: u64, model_id: &str) -> Self {
        Self {
            seed,
            model_id: model_id.to_string(),
            temperature: 0.0,
            max_output_units: DEFAULT_MAX_OUTPUT_UNITS,
            metric: MetricKind::RougeL,
            template_hash: String::new(),
            provider_id: String::new(),
            embedder_id: String::new(),
        }
    }

    fn request(&self, prompt: &str) -> ChatRequest {
        let mut r = ChatRequest::user(&self.model_id, prompt);
        r.temperature = self.temperature;
        r.max_output_units = self.max_output_units;
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotSweepConfig {
    pub category: Category,
    pub max_shots: usize,
    pub repetitions: u32,
    #[serde(flatten)]
    pub settings: RunSettings,
}

impl ShotSweepConfig {
    pub fn new(category: Category, settings: RunSettings) -> Self {
        Self {
            category,
            max_shots: 10,
            repetitions: 10,
            settings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationSweepConfig {
    pub category: Category,
    pub shots: usize,
    #[serde(default)]
    pub limit: Option<u64>,
    #[serde(flatten)]
    pub settings: RunSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalEvalConfig {
    pub category: Category,
    pub shots: usize,
    /// Example order; identity when absent.
    #[serde(default)]
    pub ordering: Option<Vec<usize>>,
    #[serde(flatten)]
    pub settings: RunSettings,
}

/// Execution resources for an experiment.
pub struct Harness<'a> {
    pub client: &'a LlmClient,
    pub cache: &'a ResponseCache,
    pub embedder: &'a dyn EmbeddingProvider,
    pub template: &'a PromptTemplate,
    pub workers: usize,
    /// Stop (as if killed) after this many new ledger rows.
    pub stop_after: Option<usize>,
}

impl Harness<'_> {
    /// Record the template, provider and embedder identities in `settings`.
    pub fn bind(&self, settings: &mut RunSettings) {
        settings.template_hash = self.template.hash();
        settings.provider_id = self.client.provider_id();
        settings.embedder_id = self.embedder.id();
    }

    fn check(&self, settings: &RunSettings) -> Result<(), ExperimentError> {
        let mut bound = settings.clone();
        self.bind(&mut bound);
        if &bound != settings {
            return Err(ExperimentError::Config(
                "template, provider or embedder differ from the configuration".into(),
            ));
        }
        if self.workers == 0 {
            return Err(ExperimentError::Config("worker count must be at least 1".into()));
        }
        Ok(())
    }
}

struct WorkUnit {
    key: RowKey,
    item: ItemRef,
    ordering: Option<Vec<usize>>,
    request: ChatRequest,
    reference: String,
    repetition_index: u32,
}

enum Outcome {
    Row(Box<LedgerRow>),
    Fatal(LlmError),
}

struct RowMeta {
    experiment: ExperimentKind,
    config_hash: String,
    prompt_hash: String,
}

struct Run<'h, 'a> {
    harness: &'h Harness<'a>,
    ledger: Ledger,
    meta: RowMeta,
    written: usize,
}

impl<'h, 'a> Run<'h, 'a> {
    fn open<C: Serialize>(
        harness: &'h Harness<'a>,
        path: &std::path::Path,
        experiment: ExperimentKind,
        config: &C,
    ) -> Result<Self, ExperimentError> {
        let config_hash = json_hash(config);
        let prompt_hash = harness.template.hash();
        let header = LedgerHeader::new(
            experiment,
            &config_hash,
            &prompt_hash,
            serde_json::to_value(config).expect("config serializes"),
        );
        Ok(Self {
            harness,
            ledger: Ledger::open(path, header)?,
            meta: RowMeta {
                experiment,
                config_hash,
                prompt_hash,
            },
            written: 0,
        })
    }

    /// Run the units not yet in the ledger and return the rows of all units,
    /// in unit order.
    fn execute(&mut self, units: Vec<WorkUnit>) -> Result<Vec<LedgerRow>, ExperimentError> {
        let pending: Vec<&WorkUnit> = units.iter().filter(|u| !self.ledger.contains(&u.key)).collect();
        if !pending.is_empty() {
            self.execute_pending(&pending)?;
        }
        Ok(units
            .iter()
            .map(|u| self.ledger.get(&u.key).expect("row written").clone())
            .collect())
    }

    fn execute_pending(&mut self, pending: &[&WorkUnit]) -> Result<(), ExperimentError> {
        let next = AtomicUsize::new(0);
        let abort = AtomicBool::new(false);
        let workers = self.harness.workers.min(pending.len()).max(1);
        let (tx, rx) = mpsc::channel::<(usize, Outcome)>();
        let Run {
            harness,
            ledger,
            meta,
            written,
        } = self;
        let (harness, meta) = (*harness, &*meta);
        let mut failure: Option<ExperimentError> = None;

        std::thread::scope(|scope| {
            for _ in 0..workers {
                let tx = tx.clone();
                let (next, abort) = (&next, &abort);
                scope.spawn(move || {
                    while !abort.load(Ordering::SeqCst) {
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        if i >= pending.len() {
                            break;
                        }
                        if tx.send((i, score(harness, meta, pending[i]))).is_err() {
                            break;
                        }
                    }
                });
            }
            drop(tx);

            let mut buffer: BTreeMap<usize, Outcome> = BTreeMap::new();
            let mut cursor = 0;
            for (i, outcome) in rx {
                if failure.is_some() {
                    continue;
                }
                buffer.insert(i, outcome);
                while let Some(outcome) = buffer.remove(&cursor) {
                    cursor += 1;
                    let row = match outcome {
                        Outcome::Row(row) => row,
                        Outcome::Fatal(e) => {
                            abort.store(true, Ordering::SeqCst);
                            failure = Some(e.into());
                            break;
                        }
                    };
                    if let Err(e) = ledger.append(*row) {
                        abort.store(true, Ordering::SeqCst);
                        failure = Some(e.into());
                        break;
                    }
                    *written += 1;
                    if harness.stop_after.is_some_and(|n| *written >= n) {
                        abort.store(true, Ordering::SeqCst);
                        failure = Some(ExperimentError::Interrupted { written: *written });
                        break;
                    }
                }
            }
        });
        failure.map_or(Ok(()), Err)
    }
}

fn score(h: &Harness, meta: &RowMeta, unit: &WorkUnit) -> Outcome {
    let clock = h.client.clock();
    let started_at = clock.unix_time();
    let attempt = catch_unwind(AssertUnwindSafe(|| {
        h.client
            .cached_complete(&unit.request, h.cache, unit.repetition_index)
            .map(|resp| {
                let scored = evaluate_pair(&unit.reference, &resp.text, h.embedder);
                (resp.text, scored)
            })
    }));
    let (response, report, error) = match attempt {
        Ok(Ok((text, Ok(report)))) => (text, report, None),
        Ok(Ok((text, Err(e)))) => (text, MetricReport::ZERO, Some(format!("scoring failed: {e}"))),
        Ok(Err(e)) if e.is_fatal() => return Outcome::Fatal(e),
        Ok(Err(e)) => (String::new(), MetricReport::ZERO, Some(e.to_string())),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_default();
            (String::new(), MetricReport::ZERO, Some(format!("worker panicked: {msg}")))
        }
    };
    Outcome::Row(Box::new(LedgerRow {
        kind: "row".into(),
        experiment: meta.experiment,
        config_hash: meta.config_hash.clone(),
        prompt_hash: meta.prompt_hash.clone(),
        shots: unit.key.0,
        index: unit.key.1,
        position: unit.key.2,
        item: unit.item.clone(),
        ordering: unit.ordering.clone(),
        reference: unit.reference.clone(),
        response,
        failed: error.is_some(),
        error,
        report,
        started_at,
        finished_at: clock.unix_time(),
    }))
}

fn item_unit(
    settings: &RunSettings,
    template: &PromptTemplate,
    examples: &ExampleSet,
    target: &GoldExample,
    key: RowKey,
    ordering: Option<Vec<usize>>,
    repetition_index: u32,
) -> Result<WorkUnit, ExperimentError> {
    let spec = PromptSpec::new(template.clone(), examples.clone(), &target.input)?;
    Ok(WorkUnit {
        key,
        item: target.item.clone(),
        ordering,
        request: settings.request(&build_prompt(&spec)),
        reference: target.gold.clone(),
        repetition_index,
    })
}

/// Scores of one (shot count, index) cell over its items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub shots: usize,
    pub index: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordering: Option<Vec<usize>>,
    pub items: usize,
    pub failed: usize,
    pub means: MetricMeans,
}

/// Group rows into cells ordered by (shots, index); items within a cell are
/// averaged in position order, independent of row order in the input.
pub fn summarize_cells(rows: &[LedgerRow]) -> Vec<CellSummary> {
    let mut cells: BTreeMap<(usize, u64), Vec<&LedgerRow>> = BTreeMap::new();
    for r in rows {
        cells.entry((r.shots, r.index)).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((shots, index), mut rs)| {
            rs.sort_by_key(|r| r.position);
            CellSummary {
                shots,
                index,
                ordering: rs[0].ordering.clone(),
                items: rs.len(),
                failed: rs.iter().filter(|r| r.failed).count(),
                means: MetricMeans::of(rs.iter().map(|r| &r.report)),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub shots: usize,
    pub repetition: u32,
    pub item_reports: Vec<(ItemRef, MetricReport)>,
    pub failed: usize,
    pub means: MetricMeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotSweepResult {
    pub config: ShotSweepConfig,
    /// `matrix[k][r]`
    pub matrix: Vec<Vec<RepetitionResult>>,
}

impl ShotSweepResult {
    /// `[shot][repetition]` means of one metric.
    pub fn rep_means(&self, metric: MetricKind) -> Vec<Vec<f64>> {
        self.matrix
            .iter()
            .map(|row| row.iter().map(|r| r.means.get(metric)).collect())
            .collect()
    }

    /// Per-shot means over repetitions of every metric.
    pub fn shot_means(&self) -> Vec<MetricMeans> {
        self.matrix.iter().map(|row| mean_of_means(row.iter().map(|r| &r.means))).collect()
    }

    /// Box-plot summary of the repetition means at each shot count.
    pub fn boxplots(&self, metric: MetricKind) -> Vec<BoxplotSummary> {
        self.rep_means(metric)
            .iter()
            .map(|v| boxplot_summary(v).expect("at least one repetition"))
            .collect()
    }
}

/// Field-wise mean, summed in iteration order.
pub fn mean_of_means<'a>(means: impl IntoIterator<Item = &'a MetricMeans>) -> MetricMeans {
    let mut sums = [0.0; 6];
    let mut n = 0usize;
    for m in means {
        for (s, k) in sums.iter_mut().zip(MetricKind::ALL) {
            *s += m.get(k);
        }
        n += 1;
    }
    if n == 0 {
        return MetricMeans::default();
    }
    let v = sums.map(|s| s / n as f64);
    MetricMeans {
        rouge1: v[0],
        rouge2: v[1],
        rouge_l: v[2],
        rouge_s: v[3],
        meteor: v[4],
        bertscore: v[5],
    }
}

fn check_temperature(settings: &RunSettings) -> Result<(), ExperimentError> {
    if !(settings.temperature >= 0.0 && settings.temperature.is_finite()) {
        return Err(ExperimentError::Config(format!("temperature {}", settings.temperature)));
    }
    Ok(())
}

/// Shot counts `0..=max_shots`, each with `repetitions` calls per validation
/// item. The `k`-shot examples are the first `k` of one seeded draw.
pub fn run_shot_sweep(
    config: &ShotSweepConfig,
    split: &DatasetSplit<GoldExample>,
    harness: &Harness,
    ledger_path: &std::path::Path,
) -> Result<ShotSweepResult, ExperimentError> {
    harness.check(&config.settings)?;
    check_temperature(&config.settings)?;
    let pool = EXAMPLE_POOL_SIZE.min(split.train.len());
    if config.max_shots > pool {
        return Err(ExperimentError::Config(format!(
            "max_shots {} exceeds the example pool of {pool}",
            config.max_shots
        )));
    }
    if config.repetitions == 0 {
        return Err(ExperimentError::Config("repetitions must be at least 1".into()));
    }
    if split.category != config.category {
        return Err(ExperimentError::Config("split category differs from the configuration".into()));
    }
    let examples = select_examples(split, config.max_shots, config.settings.seed)?;
    let mut units = Vec::new();
    for k in 0..=config.max_shots {
        let shots = examples.prefix(k);
        for r in 0..config.repetitions {
            for (pos, target) in split.validation.iter().enumerate() {
                units.push(item_unit(
                    &config.settings,
                    harness.template,
                    &shots,
                    target,
                    (k, r as u64, pos),
                    None,
                    r,
                )?);
            }
        }
    }
    let mut run = Run::open(harness, ledger_path, ExperimentKind::ShotSweep, config)?;
    let rows = run.execute(units)?;
    Ok(shot_sweep_from_rows(config, &rows))
}

/// Rebuild the sweep matrix from ledger rows.
pub fn shot_sweep_from_rows(config: &ShotSweepConfig, rows: &[LedgerRow]) -> ShotSweepResult {
    let mut grouped: BTreeMap<(usize, u64), Vec<&LedgerRow>> = BTreeMap::new();
    for r in rows {
        grouped.entry((r.shots, r.index)).or_default().push(r);
    }
    let mut matrix: Vec<Vec<RepetitionResult>> = Vec::new();
    for ((shots, rep), mut rs) in grouped {
        rs.sort_by_key(|r| r.position);
        if matrix.len() <= shots {
            matrix.resize_with(shots + 1, Vec::new);
        }
        matrix[shots].push(RepetitionResult {
            shots,
            repetition: rep as u32,
            item_reports: rs.iter().map(|r| (r.item.clone(), r.report)).collect(),
            failed: rs.iter().filter(|r| r.failed).count(),
            means: MetricMeans::of(rs.iter().map(|r| &r.report)),
        });
    }
    ShotSweepResult {
        config: config.clone(),
        matrix,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub index: u64,
    pub ordering: Vec<usize>,
    /// Mean F1 of the configured metric over validation items.
    pub mean: f64,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationSweepResult {
    pub config: PermutationSweepConfig,
    pub results: Vec<PermutationResult>,
    pub stats: StreamingStats,
    pub summary: BoxplotSummary,
}

/// Every ordering (or a seeded sample of `limit` orderings) of the `shots`
/// selected examples, each scored over the validation items.
pub fn run_permutation_sweep(
    config: &PermutationSweepConfig,
    split: &DatasetSplit<GoldExample>,
    harness: &Harness,
    ledger_path: &std::path::Path,
    allow_expensive: bool,
) -> Result<PermutationSweepResult, ExperimentError> {
    harness.check(&config.settings)?;
    check_temperature(&config.settings)?;
    if split.category != config.category {
        return Err(ExperimentError::Config("split category differs from the configuration".into()));
    }
    let total = factorial(config.shots).ok_or(PromptError::PermutationSize(config.shots))?;
    let orderings = config.limit.map_or(total, |l| l.min(total));
    if orderings > PERMUTATION_BUDGET && !allow_expensive {
        return Err(ExperimentError::BudgetExceeded {
            orderings,
            budget: PERMUTATION_BUDGET,
        });
    }
    let examples = select_examples(split, config.shots, config.settings.seed)?;
    let stream = enumerate_permutations(config.shots, config.limit, config.settings.seed)?;
    let mut run = Run::open(harness, ledger_path, ExperimentKind::PermutationSweep, config)?;
    let metric = config.settings.metric;

    let mut results = Vec::new();
    let mut stats = StreamingStats::default();
    let mut batch = Vec::with_capacity(PERMUTATION_BATCH);
    let mut stream = stream.peekable();
    while stream.peek().is_some() {
        batch.clear();
        batch.extend(stream.by_ref().take(PERMUTATION_BATCH));
        let mut units = Vec::new();
        for p in &batch {
            let ordered = examples.reordered(&p.ordering);
            for (pos, target) in split.validation.iter().enumerate() {
                units.push(item_unit(
                    &config.settings,
                    harness.template,
                    &ordered,
                    target,
                    (config.shots, p.index, pos),
                    Some(p.ordering.clone()),
                    0,
                )?);
            }
        }
        let rows = run.execute(units)?;
        for cell in summarize_cells(&rows) {
            let mean = cell.means.get(metric);
            stats.push(mean);
            results.push(PermutationResult {
                index: cell.index,
                ordering: cell.ordering.unwrap_or_default(),
                mean,
                failed: cell.failed,
            });
        }
    }
    let means: Vec<f64> = results.iter().map(|r| r.mean).collect();
    Ok(PermutationSweepResult {
        config: config.clone(),
        summary: boxplot_summary(&means).map_err(|e| ExperimentError::Config(e.to_string()))?,
        results,
        stats,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalEvalRow {
    pub category: Category,
    pub shots: usize,
    pub items: usize,
    pub failed: usize,
    pub means: MetricMeans,
}

/// One prompt configuration applied to every test item.
pub fn run_final_eval(
    config: &FinalEvalConfig,
    split: &DatasetSplit<GoldExample>,
    harness: &Harness,
    ledger_path: &std::path::Path,
) -> Result<FinalEvalRow, ExperimentError> {
    harness.check(&config.settings)?;
    check_temperature(&config.settings)?;
    if split.category != config.category {
        return Err(ExperimentError::Config("split category differs from the configuration".into()));
    }
    let examples = select_examples(split, config.shots, config.settings.seed)?;
    let ordering = config.ordering.clone().unwrap_or_else(|| (0..config.shots).collect());
    let mut sorted = ordering.clone();
    sorted.sort_unstable();
    if sorted != (0..config.shots).collect::<Vec<_>>() {
        return Err(ExperimentError::Config(format!(
            "ordering {ordering:?} is not a permutation of {} examples",
            config.shots
        )));
    }
    let ordered = examples.reordered(&ordering);
    let units = split
        .test
        .iter()
        .enumerate()
        .map(|(pos, target)| {
            item_unit(
                &config.settings,
                harness.template,
                &ordered,
                target,
                (config.shots, 0, pos),
                config.ordering.clone(),
                0,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut run = Run::open(harness, ledger_path, ExperimentKind::FinalEval, config)?;
    let rows = run.execute(units)?;
    Ok(final_row_from_rows(config.category, config.shots, &rows))
}

pub fn final_row_from_rows(category: Category, shots: usize, rows: &[LedgerRow]) -> FinalEvalRow {
    let mut rs: Vec<&LedgerRow> = rows.iter().collect();
    rs.sort_by_key(|r| r.position);
    FinalEvalRow {
        category,
        shots,
        items: rs.len(),
        failed: rs.iter().filter(|r| r.failed).count(),
        means: MetricMeans::of(rs.iter().map(|r| &r.report)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    pub header: LedgerHeader,
    pub rows: usize,
    /// Rows whose recomputed report differs from the recorded one.
    pub mismatched_rows: Vec<RowKey>,
    pub recorded: Vec<CellSummary>,
    pub recomputed: Vec<CellSummary>,
}

impl ReplayOutcome {
    pub fn is_exact(&self) -> bool {
        self.mismatched_rows.is_empty() && self.recorded == self.recomputed
    }
}

/// Rescore every successful row from its recorded response and rebuild the
/// cell aggregates both ways.
pub fn replay_ledger(
    path: &std::path::Path,
    embedder: &dyn EmbeddingProvider,
) -> Result<(ReplayOutcome, Vec<LedgerRow>), ExperimentError> {
    let (header, rows) = load_ledger(path)?;
    let mut rescored = rows.clone();
    let mut mismatched_rows = Vec::new();
    for r in rescored.iter_mut().filter(|r| !r.failed) {
        let report = evaluate_pair(&r.reference, &r.response, embedder)
            .map_err(|e| ExperimentError::Config(format!("rescoring failed: {e}")))?;
        if report != r.report {
            mismatched_rows.push(r.key());
        }
        r.report = report;
    }
    Ok((
        ReplayOutcome {
            header,
            rows: rows.len(),
            mismatched_rows,
            recorded: summarize_cells(&rows),
            recomputed: summarize_cells(&rescored),
        },
        rescored,
    ))
}
