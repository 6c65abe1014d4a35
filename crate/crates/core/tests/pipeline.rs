use std::sync::Arc;

use ropasum_core::corpus::synthetic::synthetic_corpus;
use ropasum_core::corpus::{load_corpus, Category};
use ropasum_core::experiments::{gold_split, load_ledger, run_final_eval, FinalEvalConfig, Harness, RunSettings};
use ropasum_core::gold::render_gold;
use ropasum_core::llm::mock::{EchoGold, GoldLookup, ScriptedProvider};
use ropasum_core::llm::{ChatProvider, ChatRequest, LlmClient, ResponseCache};
use ropasum_core::metrics::{HashEmbedder, MetricKind};
use ropasum_core::prompting::{build_prompt, count_example_blocks, select_examples, PromptSpec, PromptTemplate};

fn write_corpus(dir: &std::path::Path) -> std::path::PathBuf {
    let raw = synthetic_corpus(&Category::ALL, 25, 4, true);
    let path = dir.join("corpus.json");
    std::fs::write(&path, serde_json::to_string_pretty(&raw).unwrap()).unwrap();
    path
}

#[test]
fn corpus_file_to_prompt() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = load_corpus(write_corpus(dir.path())).unwrap();
    assert_eq!(corpus.census()[&Category::Step], 25);
    let split = gold_split(&corpus, Category::Step, 42).unwrap();
    assert_eq!(split.sizes(), (15, 5, 5));
    let template = PromptTemplate::default();
    let examples = select_examples(&split, 4, 42).unwrap();
    let prompt = build_prompt(&PromptSpec::new(template.clone(), examples, &split.test[0].input).unwrap());
    assert_eq!(count_example_blocks(&prompt, &template), 4);
    assert!(prompt.ends_with("Output:"));
    assert!(!prompt.contains(&split.test[0].gold));
}

#[test]
fn final_eval_through_file_cache() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = load_corpus(write_corpus(dir.path())).unwrap();
    let split = gold_split(&corpus, Category::Dp, 42).unwrap();
    let gold = render_gold(&corpus).unwrap();
    let template = PromptTemplate::default();
    let embedder = HashEmbedder::default();
    let cache_path = dir.path().join("cache.jsonl");

    let run = |provider: Arc<dyn ChatProvider>, ledger: &str| {
        let client = LlmClient::new(provider);
        let cache = ResponseCache::open(&cache_path).unwrap();
        let h = Harness {
            client: &client,
            cache: &cache,
            embedder: &embedder,
            template: &template,
            workers: 2,
            stop_after: None,
        };
        let mut settings = RunSettings::new(42, "echo");
        h.bind(&mut settings);
        let config = FinalEvalConfig {
            category: Category::Dp,
            shots: 3,
            ordering: Some(vec![2, 0, 1]),
            settings,
        };
        run_final_eval(&config, &split, &h, &dir.path().join(ledger)).unwrap()
    };

    let echo = Arc::new(EchoGold::new(GoldLookup::from_examples(&gold)));
    let first = run(echo, "a.jsonl");
    assert_eq!(first.items, 5);
    assert_eq!(first.means.get(MetricKind::RougeL), 1.0);

    // Same provider id, answers come from the cache instead of the script.
    struct Renamed(ScriptedProvider);
    impl ChatProvider for Renamed {
        fn id(&self) -> String {
            "echo_gold".into()
        }
        fn send(
            &self,
            request: &ChatRequest,
            ctx: &ropasum_core::llm::CallContext,
        ) -> Result<ropasum_core::llm::ProviderReply, ropasum_core::llm::ProviderError> {
            self.0.send(request, ctx)
        }
    }
    let probe = Arc::new(Renamed(ScriptedProvider::repeating("wrong")));
    assert_eq!(probe.id(), EchoGold::new(GoldLookup::from_examples(&gold)).id());
    let second = run(probe.clone(), "b.jsonl");
    assert_eq!(second, first);
    assert_eq!(probe.0.calls(), 0);

    let (header, rows) = load_ledger(dir.path().join("b.jsonl")).unwrap();
    assert_eq!(header.config["ordering"], serde_json::json!([2, 0, 1]));
    assert!(rows.iter().all(|r| r.ordering.as_deref() == Some(&[2, 0, 1][..])));
}
