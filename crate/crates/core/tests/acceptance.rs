//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs under `cargo test` (harness = false).

use std::collections::{BTreeSet, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use ropasum_core::corpus::synthetic::synthetic_corpus;
use ropasum_core::corpus::{
    build_verb_lexicon, cohen_kappa, parse_corpus, split_items, split_sizes, tokenize_strs, ArgKind, Category, Corpus,
};
use ropasum_core::diagnostics::{check_extractiveness, diagnose, DiscrepancyCode};
use ropasum_core::experiments::{
    gold_split, load_ledger, replay_ledger, run_permutation_sweep, run_shot_sweep, shot_sweep_from_rows, Harness,
    PermutationSweepConfig, RunSettings, ShotSweepConfig,
};
use ropasum_core::gold::{parse_summary, render_gold, render_summary, GoldExample};
use ropasum_core::llm::mock::{CorruptGold, EchoGold, GoldLookup};
use ropasum_core::llm::{max_in_window, ChatProvider, Clock, LlmClient, RateLimiter, ResponseCache, VirtualClock};
use ropasum_core::metrics::{
    lcs_len, rouge_l, rouge_l_tokens, rouge_n, rouge_n_tokens, rouge_s_tokens, HashEmbedder, MetricKind,
};
use ropasum_core::prompting::{enumerate_permutations, PromptTemplate};
use ropasum_core::rng::SeededRng;
use ropasum_core::stats::{se_curve, select_shot_count, SeCurvePoint};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const VOCAB: [&str; 5] = ["a", "b", "c", "d", "e"];

fn random_tokens(rng: &mut SeededRng, max_len: u64) -> Vec<String> {
    let len = rng.below(max_len + 1);
    (0..len).map(|_| VOCAB[rng.below(VOCAB.len() as u64) as usize].to_string()).collect()
}

fn lcs_oracle(a: &[String], b: &[String]) -> usize {
    match (a.split_first(), b.split_first()) {
        (Some((x, ra)), Some((y, rb))) => {
            if x == y {
                1 + lcs_oracle(ra, rb)
            } else {
                lcs_oracle(ra, b).max(lcs_oracle(a, rb))
            }
        }
        _ => 0,
    }
}

/// Precision, recall, F1 from explicit skip-bigram lists matched one to one.
fn rouge_s_oracle(reference: &[String], candidate: &[String]) -> (f64, f64, f64) {
    let pairs = |t: &[String]| {
        let mut v = Vec::new();
        for i in 0..t.len() {
            for j in i + 1..t.len() {
                v.push((t[i].clone(), t[j].clone()));
            }
        }
        v
    };
    let r = pairs(reference);
    let c = pairs(candidate);
    let mut used = vec![false; r.len()];
    let mut overlap = 0usize;
    for p in &c {
        if let Some(i) = (0..r.len()).find(|&i| !used[i] && r[i] == *p) {
            used[i] = true;
            overlap += 1;
        }
    }
    if overlap == 0 {
        return (0.0, 0.0, 0.0);
    }
    let p = overlap as f64 / c.len() as f64;
    let rc = overlap as f64 / r.len() as f64;
    (p, rc, 2.0 * p * rc / (p + rc))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = SeededRng::new(2024);
    for i in 0..1000 {
        let r = random_tokens(&mut rng, 7);
        let c = random_tokens(&mut rng, 7);
        let l = lcs_oracle(&r, &c);
        ensure!(lcs_len(&r, &c) == l, "pair {i}: LCS {} vs oracle {l}", lcs_len(&r, &c));
        let rl = rouge_l_tokens(&r, &c);
        if l > 0 {
            let p = l as f64 / c.len() as f64;
            let rc = l as f64 / r.len() as f64;
            ensure!(rl.f1 == 2.0 * p * rc / (p + rc), "pair {i}: ROUGE-L F1 {}", rl.f1);
        } else {
            ensure!(rl.f1 == 0.0, "pair {i}: ROUGE-L F1 {} with empty LCS", rl.f1);
        }
        let s = rouge_s_tokens(&r, &c, None);
        let (op, or, of) = rouge_s_oracle(&r, &c);
        ensure!(
            (s.precision, s.recall, s.f1) == (op, or, of),
            "pair {i}: ROUGE-S {s:?} vs oracle ({op}, {or}, {of})"
        );
        ensure!(rouge_s_tokens(&r, &c, Some(0)) == rouge_n_tokens(&r, &c, 2), "pair {i}: skip 0 differs from ROUGE-2");
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("1000 pairs exact in {elapsed:.2?}"))
}

fn criterion_2() -> Outcome {
    let r1 = rouge_n("user orders food", "user food", 1).f1;
    ensure!((r1 - 0.8).abs() <= 1e-9, "ROUGE-1 F1 {r1}");
    let rl = rouge_l("User gets promotions", "User gets regular promotions offered").f1;
    ensure!((rl - 0.75).abs() <= 1e-9, "ROUGE-L F1 {rl}");
    Ok(format!("ROUGE-1 {r1}, ROUGE-L {rl}"))
}

struct Rig {
    client: LlmClient,
    cache: ResponseCache,
    embedder: HashEmbedder,
    template: PromptTemplate,
}

impl Rig {
    fn new(provider: Arc<dyn ChatProvider>) -> Self {
        Self {
            client: LlmClient::new(provider),
            cache: ResponseCache::in_memory(),
            embedder: HashEmbedder::default(),
            template: PromptTemplate::default(),
        }
    }

    fn harness(&self, workers: usize) -> Harness<'_> {
        Harness {
            client: &self.client,
            cache: &self.cache,
            embedder: &self.embedder,
            template: &self.template,
            workers,
            stop_after: None,
        }
    }
}

fn goal_corpus(n: usize) -> Corpus {
    synthetic_corpus(&[Category::Goal], n, 3, false).resolve().expect("synthetic corpus")
}

fn lookup(corpus: &Corpus) -> GoldLookup {
    GoldLookup::from_examples(&render_gold(corpus).expect("gold renders"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = goal_corpus(20);
    let split = gold_split(&corpus, Category::Goal, 42).map_err(|e| e.to_string())?;
    let rig = Rig::new(Arc::new(EchoGold::new(lookup(&corpus))));
    let harness = rig.harness(4);

    let mut settings = RunSettings::new(42, "echo");
    harness.bind(&mut settings);
    let config = ShotSweepConfig::new(Category::Goal, settings.clone());
    ensure!(config.max_shots == 10 && config.repetitions == 10, "defaults are not S=10, R=10");
    let sweep = run_shot_sweep(&config, &split, &harness, &dir.path().join("shots.jsonl")).map_err(|e| e.to_string())?;
    let mut cells = 0;
    for row in &sweep.matrix {
        for rep in row {
            cells += 1;
            ensure!(rep.means.get(MetricKind::RougeL) == 1.0, "shots {} rep {}: ROUGE-L {}", rep.shots, rep.repetition, rep.means.get(MetricKind::RougeL));
            for (item, report) in &rep.item_reports {
                ensure!(report.meteor.f1 >= 0.98, "shots {} item {item}: METEOR {}", rep.shots, report.meteor.f1);
            }
        }
    }
    for (k, b) in sweep.boxplots(MetricKind::RougeL).iter().enumerate() {
        ensure!(b.variance == 0.0, "shots {k}: repetition variance {}", b.variance);
    }

    let perms = PermutationSweepConfig {
        category: Category::Goal,
        shots: 4,
        limit: None,
        settings,
    };
    let p = run_permutation_sweep(&perms, &split, &harness, &dir.path().join("perms.jsonl"), false)
        .map_err(|e| e.to_string())?;
    ensure!(p.results.len() == 24, "{} orderings", p.results.len());
    ensure!(p.summary.variance == 0.0 && p.stats.variance() == 0.0, "permutation variance {}", p.summary.variance);

    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("{cells} cells at ROUGE-L 1.0, 24 orderings with variance 0, {elapsed:.2?}"))
}

fn criterion_4() -> Outcome {
    let sizes = [(Category::Goal, 64, 13), (Category::Step, 83, 17), (Category::Dp, 253, 51)];
    let mut total = 0;
    for (category, n, expected) in sizes {
        let (_, _, test) = split_sizes(n);
        ensure!(test == expected, "{category}: {n} items give {test} test items");
        total += test;
        let items: Vec<usize> = (0..n).collect();
        let a = split_items(items.clone(), category, 7).map_err(|e| e.to_string())?;
        let b = split_items(items.clone(), category, 7).map_err(|e| e.to_string())?;
        ensure!(a == b, "{category}: not deterministic");
        let c = split_items(items.clone(), category, 8).map_err(|e| e.to_string())?;
        ensure!(a != c, "{category}: seed has no effect");
        ensure!(a.test.len() == expected, "{category}: test set {}", a.test.len());
        let mut all: Vec<usize> = a.train.iter().chain(&a.validation).chain(&a.test).copied().collect();
        all.sort_unstable();
        ensure!(all == items, "{category}: not a partition");
    }
    ensure!(total == 81, "total {total}");
    Ok("13/17/51, total 81".into())
}

fn criterion_5() -> Outcome {
    let distinct = |k: usize, limit: Option<u64>, seed: u64| -> Result<(usize, usize), String> {
        let perms: Vec<_> = enumerate_permutations(k, limit, seed).map_err(|e| e.to_string())?.collect();
        let set: HashSet<Vec<usize>> = perms.iter().map(|p| p.ordering.clone()).collect();
        Ok((perms.len(), set.len()))
    };
    ensure!(distinct(6, None, 0)? == (720, 720), "k=6 gives {:?}", distinct(6, None, 0)?);
    ensure!(distinct(3, None, 0)? == (6, 6), "k=3 gives {:?}", distinct(3, None, 0)?);
    for (k, limit, seed) in [(8, 100, 1), (10, 1000, 2), (6, 720, 3), (12, 500, 4)] {
        let got = distinct(k, Some(limit), seed)?;
        ensure!(got == (limit as usize, limit as usize), "k={k} limit {limit}: {got:?}");
    }
    Ok("720 and 6 orderings; samples distinct".into())
}

fn point(shots: usize, se: f64) -> SeCurvePoint {
    SeCurvePoint {
        shots,
        mean: 0.5,
        standard_error: se,
        n: 10,
    }
}

fn criterion_6() -> Outcome {
    let curve = se_curve(&[vec![0.2, 0.4], vec![0.6, 0.8]]).map_err(|e| e.to_string())?;
    let se = curve[1].standard_error;
    ensure!((se - 0.1291).abs() <= 1e-4, "SE at s=1 is {se}");

    let fixture: Vec<_> = [0.2, 0.1, 0.06, 0.04, 0.03, 0.06]
        .iter()
        .enumerate()
        .map(|(s, &e)| point(s, e))
        .collect();
    let pick = select_shot_count(&fixture, 0.05).map_err(|e| e.to_string())?;
    ensure!(pick.shots == 3 && pick.threshold_met, "picked {pick:?}");
    let exact: Vec<_> = [0.09, 0.05, 0.01].iter().enumerate().map(|(s, &e)| point(s, e)).collect();
    let pick = select_shot_count(&exact, 0.05).map_err(|e| e.to_string())?;
    ensure!(pick.shots == 1, "boundary picked {pick:?}");
    let never: Vec<_> = [0.3, 0.2, 0.1].iter().enumerate().map(|(s, &e)| point(s, e)).collect();
    let pick = select_shot_count(&never, 0.05).map_err(|e| e.to_string())?;
    ensure!(pick.shots == 2 && !pick.threshold_met, "unmet threshold picked {pick:?}");

    let mut rng = SeededRng::new(77);
    let mut monotone = 0;
    for _ in 0..200 {
        let reps: Vec<Vec<f64>> = (0..=10)
            .map(|_| (0..10).map(|_| 0.5 + 0.4 * (rng.unit() - 0.5)).collect())
            .collect();
        let c = se_curve(&reps).map_err(|e| e.to_string())?;
        if c[10].standard_error < c[1].standard_error {
            monotone += 1;
        }
    }
    ensure!(monotone >= 190, "{monotone}/200 trials");
    Ok(format!("SE {se:.4}, first crossing at 3, {monotone}/200 trials shrink"))
}

const PROMO: &str = "If I opt in, I would probably be able to get regular promotions offered to me.";

fn promo_corpus() -> Corpus {
    let tokens = tokenize_strs(PROMO);
    let json = serde_json::json!({
        "scenarios": [{
            "id": "promo",
            "raw_text": PROMO,
            "sentences": [{"index": 0, "tokens": tokens}]
        }],
        "gold_annotations": [{
            "scenario_id": "promo", "sentence_index": 0, "verb_range": [11, 11], "verb_lemma": "get",
            "category": "goal", "actor": "user", "arguments": [{"kind": "data_type", "range": [13, 13]}]
        }]
    });
    parse_corpus(&json.to_string()).expect("promo corpus")
}

fn all_gold(corpus: &Corpus) -> Result<Vec<GoldExample>, String> {
    render_gold(corpus).map_err(|e| e.to_string())
}

fn criterion_7() -> Outcome {
    let corpus = promo_corpus();
    let gold = all_gold(&corpus)?;
    ensure!(gold[0].gold == "User gets promotions", "rendered {:?}", gold[0].gold);
    let alignment = parse_summary(&gold[0].gold, &gold[0].template);
    ensure!(alignment.fully_matched(), "round trip {alignment:?}");

    let synthetic = synthetic_corpus(&Category::ALL, 30, 9, false).resolve().map_err(|e| e.to_string())?;
    let mut checked = 0;
    for c in [&corpus, &synthetic] {
        for (example, annotation) in all_gold(c)?.iter().zip(&c.gold_annotations) {
            let sentence = c.sentence_of(annotation).ok_or("missing sentence")?;
            let (ok, extra) = check_extractiveness(&example.gold, sentence, &example.template);
            ensure!(ok, "{} is not extractive: {extra:?}", example.gold);
            ensure!(parse_summary(&example.gold, &example.template).fully_matched(), "{} does not round-trip", example.gold);
            checked += 1;
        }
    }
    Ok(format!("\"User gets promotions\"; {checked} gold renders extractive"))
}

fn criterion_8() -> Outcome {
    let corpus = promo_corpus();
    let promo = &all_gold(&corpus)?[0];
    let lexicon = build_verb_lexicon(&corpus);
    let r = diagnose("User gets regular promotions offered", &promo.template, &lexicon);
    let expected: BTreeSet<_> = [DiscrepancyCode::AdditionalModifiers].into();
    ensure!(r.codes == expected, "promotion pair coded {:?}", r.codes);

    let synthetic = synthetic_corpus(&Category::ALL, 30, 9, false).resolve().map_err(|e| e.to_string())?;
    let lexicon = build_verb_lexicon(&synthetic);
    let mut flips = 0;
    for example in all_gold(&synthetic)? {
        let own = diagnose(&example.gold, &example.template, &lexicon);
        ensure!(own.codes.is_empty(), "gold {:?} coded {:?}", example.gold, own.codes);
        for kind in [ArgKind::DataType, ArgKind::Purpose, ArgKind::UiComponent] {
            if example.template.slot(kind).is_empty() {
                continue;
            }
            let mut reduced = example.template.clone();
            reduced.slots.remove(&kind);
            let text = render_summary(&reduced);
            let got = diagnose(&text, &example.template, &lexicon).codes;
            let want: BTreeSet<_> = DiscrepancyCode::missing_kind(kind).into_iter().collect();
            ensure!(got == want, "deleting {kind:?} from {:?} gave {got:?}", example.gold);
            flips += 1;
        }
        let without_actor = render_summary(&example.template)
            .split_once(' ')
            .map(|(_, rest)| rest.to_string())
            .unwrap_or_default();
        let got = diagnose(&without_actor, &example.template, &lexicon).codes;
        let want: BTreeSet<_> = [DiscrepancyCode::IncorrectVerbOrSubject].into();
        ensure!(got == want, "deleting the actor from {:?} gave {got:?}", example.gold);
        flips += 1;
    }
    Ok(format!("promotion pair -> {{AdditionalModifiers}}; {flips} deletions flip one code each"))
}

fn criterion_9() -> Outcome {
    let k1 = cohen_kappa(&["X", "O", "X", "O"], &["X", "O", "X", "O"]).map_err(|e| e.to_string())?;
    let k0 = cohen_kappa(&["X", "X", "O", "O"], &["X", "O", "X", "O"]).map_err(|e| e.to_string())?;
    let kh = cohen_kappa(&["X", "X", "X", "O"], &["X", "X", "O", "O"]).map_err(|e| e.to_string())?;
    ensure!(k1 == 1.0, "identical: {k1}");
    ensure!(k0.abs() < 1e-12, "balanced: {k0}");
    ensure!((kh - 0.5).abs() < 1e-12, "Po=0.75: {kh}");
    let mut rng = SeededRng::new(500);
    for i in 0..500 {
        let n = 1 + rng.below(40) as usize;
        let a: Vec<u64> = (0..n).map(|_| rng.below(4)).collect();
        let b: Vec<u64> = (0..n).map(|_| rng.below(4)).collect();
        let ab = cohen_kappa(&a, &b).map_err(|e| e.to_string())?;
        let ba = cohen_kappa(&b, &a).map_err(|e| e.to_string())?;
        ensure!(ab == ba, "pair {i}: {ab} vs {ba}");
    }
    Ok("1.0 / 0.0 / 0.5; symmetric on 500 pairs".into())
}

fn stripped(path: &Path) -> Result<Vec<ropasum_core::experiments::LedgerRow>, String> {
    let (_, rows) = load_ledger(path).map_err(|e| e.to_string())?;
    Ok(rows.iter().map(|r| r.without_timing()).collect())
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = goal_corpus(20);
    let split = gold_split(&corpus, Category::Goal, 42).map_err(|e| e.to_string())?;
    let provider: Arc<dyn ChatProvider> = Arc::new(CorruptGold::new(lookup(&corpus), 0.3, 42));
    let settings = {
        let rig = Rig::new(provider.clone());
        let mut s = RunSettings::new(42, "noisy");
        rig.harness(1).bind(&mut s);
        s
    };
    let config = ShotSweepConfig {
        max_shots: 4,
        repetitions: 3,
        ..ShotSweepConfig::new(Category::Goal, settings)
    };

    let clean_path = dir.path().join("clean.jsonl");
    let clean_rig = Rig::new(provider.clone());
    run_shot_sweep(&config, &split, &clean_rig.harness(4), &clean_path).map_err(|e| e.to_string())?;

    let resumed_path = dir.path().join("resumed.jsonl");
    let cache_path = dir.path().join("cache.jsonl");
    {
        let mut rig = Rig::new(provider.clone());
        rig.cache = ResponseCache::open(&cache_path).map_err(|e| e.to_string())?;
        let mut h = rig.harness(4);
        h.stop_after = Some(23);
        ensure!(run_shot_sweep(&config, &split, &h, &resumed_path).is_err(), "interrupted run completed");
    }
    let mut rig = Rig::new(provider.clone());
    rig.cache = ResponseCache::open(&cache_path).map_err(|e| e.to_string())?;
    let resumed = run_shot_sweep(&config, &split, &rig.harness(3), &resumed_path).map_err(|e| e.to_string())?;
    let clean_rows = stripped(&clean_path)?;
    ensure!(clean_rows == stripped(&resumed_path)?, "resumed ledger differs from the clean one");

    let (outcome, _) = replay_ledger(&resumed_path, &rig.embedder).map_err(|e| e.to_string())?;
    ensure!(outcome.is_exact(), "{} rows rescored differently", outcome.mismatched_rows.len());
    let (_, rows) = load_ledger(&resumed_path).map_err(|e| e.to_string())?;
    let rebuilt = shot_sweep_from_rows(&config, &rows);
    let json = |v: &ropasum_core::experiments::ShotSweepResult| serde_json::to_string(v).expect("serializable");
    ensure!(json(&rebuilt) == json(&resumed), "aggregates rebuilt from the ledger differ");

    let clock = Arc::new(VirtualClock::default());
    let window = Duration::from_secs(60);
    let limiter = RateLimiter::new(8, window, clock.clone()).with_audit();
    let mut rig = Rig::new(provider.clone());
    rig.client = LlmClient::new(provider).with_clock(clock.clone()).with_limiter(limiter);
    let small = ShotSweepConfig {
        max_shots: 2,
        repetitions: 2,
        ..config.clone()
    };
    run_shot_sweep(&small, &split, &rig.harness(4), &dir.path().join("limited.jsonl")).map_err(|e| e.to_string())?;
    let admissions = rig.client.limiter().ok_or("no limiter")?.admissions();
    let peak = max_in_window(&admissions, window);
    ensure!(admissions.len() == 3 * 2 * split.validation.len(), "{} admissions", admissions.len());
    ensure!(peak <= 8, "{peak} calls in one window");
    ensure!(clock.now() >= window * 2, "virtual clock only reached {:?}", clock.now());
    Ok(format!(
        "{} rows resume identically, replay exact, peak {peak}/8 over {} calls",
        clean_rows.len(),
        admissions.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("metric oracle equivalence", criterion_1),
        ("hand-computed metric fixtures", criterion_2),
        ("echo-gold end to end", criterion_3),
        ("split arithmetic", criterion_4),
        ("permutation counting", criterion_5),
        ("standard-error machinery", criterion_6),
        ("gold engine golden tests", criterion_7),
        ("diagnostics", criterion_8),
        ("kappa fixtures", criterion_9),
        ("robustness and replay", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
