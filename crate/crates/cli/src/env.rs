//! Building corpus, provider, client, cache and output directory from the
//! global flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use ropasum_core::corpus::{load_corpus, Category, Corpus};
use ropasum_core::experiments::{Harness, RunSettings};
use ropasum_core::gold::render_gold;
use ropasum_core::hashing::sha256_hex;
use ropasum_core::llm::http::{credential_from_env, HttpProvider, RemoteEmbedder, CREDENTIAL_VARS};
use ropasum_core::llm::mock::{CorruptGold, EchoGold, GoldLookup};
use ropasum_core::llm::{ChatProvider, LlmClient, ResponseCache};
use ropasum_core::metrics::{EmbeddingProvider, HashEmbedder, MetricKind, MetricMeans};
use ropasum_core::prompting::PromptTemplate;
use serde::Serialize;

use crate::failure::{invalid, runtime, CliResult};
use crate::GlobalArgs;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProviderChoice {
    Live,
    EchoGold,
    CorruptGold(f64),
}

pub fn parse_provider(s: &str) -> CliResult<ProviderChoice> {
    match s {
        "live" => Ok(ProviderChoice::Live),
        "echo_gold" => Ok(ProviderChoice::EchoGold),
        _ => {
            let p = s
                .strip_prefix("corrupt_gold:")
                .map(|rest| rest.trim_start_matches("p="))
                .ok_or_else(|| invalid(anyhow!("unknown provider {s:?} (live, echo_gold, corrupt_gold:<p>)")))?;
            let p: f64 = p
                .parse()
                .map_err(|_| invalid(anyhow!("corruption rate {p:?} is not a number")))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(anyhow!("corruption rate {p} outside [0, 1]")));
            }
            Ok(ProviderChoice::CorruptGold(p))
        }
    }
}

/// `all` or a comma-separated list of category slugs.
pub fn parse_categories(s: &str) -> CliResult<Vec<Category>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(Category::ALL.to_vec());
    }
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let c: Category = part.parse().map_err(|e: String| invalid(anyhow!(e)))?;
        if !out.contains(&c) {
            out.push(c);
        }
    }
    if out.is_empty() {
        return Err(invalid(anyhow!("no category given")));
    }
    Ok(out)
}

impl GlobalArgs {
    pub fn load_corpus(&self) -> CliResult<Corpus> {
        let path = self
            .corpus
            .as_ref()
            .ok_or_else(|| invalid(anyhow!("--corpus is required for this command")))?;
        Ok(load_corpus(path)?)
    }

    pub fn template(&self) -> CliResult<PromptTemplate> {
        match &self.template {
            Some(p) => Ok(PromptTemplate::load(p)?),
            None => Ok(PromptTemplate::default()),
        }
    }

    pub fn settings(&self) -> RunSettings {
        let mut s = RunSettings::new(self.seed, &self.model);
        s.temperature = self.temperature;
        s.max_output_units = self.max_output_units;
        s
    }

    pub fn provider(&self, corpus: &Corpus) -> CliResult<Arc<dyn ChatProvider>> {
        let lookup = || -> CliResult<GoldLookup> { Ok(GoldLookup::from_examples(&render_gold(corpus)?)) };
        Ok(match parse_provider(&self.provider)? {
            ProviderChoice::Live => Arc::new(HttpProvider::from_env(&self.endpoint).map_err(|e| {
                invalid(anyhow!(e).context(format!("set {} for the live provider", CREDENTIAL_VARS.join(" or "))))
            })?),
            ProviderChoice::EchoGold => Arc::new(EchoGold::new(lookup()?)),
            ProviderChoice::CorruptGold(p) => Arc::new(CorruptGold::new(lookup()?, p, self.seed)),
        })
    }

    pub fn client(&self, provider: Arc<dyn ChatProvider>) -> LlmClient {
        let client = LlmClient::new(provider).with_seed(self.seed);
        match self.rate_limit {
            Some(n) => client.with_rate_limit(n),
            None => client,
        }
    }

    pub fn embedder(&self) -> CliResult<Box<dyn EmbeddingProvider>> {
        if self.embedder == "hash" {
            return Ok(Box::new(HashEmbedder::default()));
        }
        let model = self
            .embedder
            .strip_prefix("remote:")
            .ok_or_else(|| invalid(anyhow!("unknown embedder {:?} (hash, remote:<model>)", self.embedder)))?;
        let credential = credential_from_env().ok_or_else(|| {
            invalid(anyhow!("set {} for the remote embedder", CREDENTIAL_VARS.join(" or ")))
        })?;
        Ok(Box::new(RemoteEmbedder::new(
            &self.embedding_endpoint,
            &credential,
            model,
            self.embedding_dimension,
        )))
    }

    pub fn out_dir(&self) -> CliResult<OutDir> {
        OutDir::create(&self.out_dir)
    }

    pub fn cache(&self, out: &mut OutDir) -> CliResult<ResponseCache> {
        let path = self.cache.clone().unwrap_or_else(|| out.path("cache.jsonl"));
        let cache = ResponseCache::open(&path)?;
        if cache.corrupt_lines() > 0 {
            log::warn!("{} corrupt cache lines skipped in {}", cache.corrupt_lines(), path.display());
        }
        out.register(&path);
        Ok(cache)
    }
}

/// Everything an experiment subcommand needs.
pub struct Session {
    pub corpus: Corpus,
    pub template: PromptTemplate,
    pub client: LlmClient,
    pub cache: ResponseCache,
    pub embedder: Box<dyn EmbeddingProvider>,
    pub out: OutDir,
}

impl Session {
    pub fn open(g: &GlobalArgs) -> CliResult<Self> {
        let corpus = g.load_corpus()?;
        let template = g.template()?;
        let client = g.client(g.provider(&corpus)?);
        let embedder = g.embedder()?;
        let mut out = g.out_dir()?;
        let cache = g.cache(&mut out)?;
        Ok(Self {
            corpus,
            template,
            client,
            cache,
            embedder,
            out,
        })
    }

    pub fn harness(&self, workers: usize) -> Harness<'_> {
        Harness {
            client: &self.client,
            cache: &self.cache,
            embedder: self.embedder.as_ref(),
            template: &self.template,
            workers,
            stop_after: None,
        }
    }
}

/// Output directory that records every artifact it writes in
/// `manifest.json` as path -> sha256.
pub struct OutDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display())).map_err(runtime)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn register(&mut self, path: &Path) {
        self.written.push(path.to_path_buf());
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.path(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display())).map_err(runtime)?;
        self.register(&path);
        Ok(path)
    }

    /// Pretty JSON with a trailing newline, as written by [`OutDir::write_json`].
    pub fn json_text<T: Serialize + ?Sized>(value: &T) -> CliResult<String> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        Ok(text)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let text = Self::json_text(value)?;
        self.write(name, &text)
    }

    pub fn write_jsonl<'a, T: Serialize + 'a>(
        &mut self,
        name: &str,
        values: impl IntoIterator<Item = &'a T>,
    ) -> CliResult<PathBuf> {
        let mut text = String::new();
        for v in values {
            text.push_str(&serde_json::to_string(v)?);
            text.push('\n');
        }
        self.write(name, &text)
    }

    pub fn write_csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> CliResult<PathBuf> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        self.register(&path);
        Ok(path)
    }

    /// CSV with the given leading columns followed by one column per metric.
    pub fn write_means_csv(&mut self, name: &str, lead: &[&str], rows: &[(Vec<String>, MetricMeans)]) -> CliResult<PathBuf> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path)?;
        let header = lead.iter().copied().chain(MetricKind::ALL.iter().map(|k| k.name()));
        w.write_record(header)?;
        for (cols, means) in rows {
            let metrics = MetricKind::ALL.iter().map(|&k| means.get(k).to_string());
            w.write_record(cols.iter().cloned().chain(metrics))?;
        }
        w.flush()?;
        self.register(&path);
        Ok(path)
    }

    /// Merge the hashes of this run's artifacts into the manifest.
    pub fn finish(self) -> CliResult {
        let manifest_path = self.path(MANIFEST);
        let mut manifest: BTreeMap<String, String> = match fs::read_to_string(&manifest_path) {
            Ok(text) => serde_json::from_str(&text)
                .with_context(|| format!("reading {}", manifest_path.display()))
                .map_err(invalid)?,
            Err(_) => BTreeMap::new(),
        };
        for p in &self.written {
            let bytes = match fs::read(p) {
                Ok(b) => b,
                Err(_) => continue,
            };
            let key = p.strip_prefix(&self.root).unwrap_or(p).to_string_lossy().into_owned();
            manifest.insert(key, sha256_hex(&bytes));
        }
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&manifest_path, text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provider_strings() {
        assert_eq!(parse_provider("live").unwrap(), ProviderChoice::Live);
        assert_eq!(parse_provider("echo_gold").unwrap(), ProviderChoice::EchoGold);
        assert_eq!(parse_provider("corrupt_gold:0.3").unwrap(), ProviderChoice::CorruptGold(0.3));
        assert_eq!(parse_provider("corrupt_gold:p=0.5").unwrap(), ProviderChoice::CorruptGold(0.5));
        assert!(parse_provider("corrupt_gold:1.5").is_err());
        assert!(parse_provider("gpt").is_err());
    }

    #[test]
    fn category_lists() {
        assert_eq!(parse_categories("all").unwrap(), Category::ALL.to_vec());
        assert_eq!(parse_categories("dp,goal,dp").unwrap(), vec![Category::Dp, Category::Goal]);
        assert!(parse_categories("task").is_err());
        assert!(parse_categories("").is_err());
    }

    #[test]
    fn manifest_merges_across_runs() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutDir::create(dir.path()).unwrap();
        out.write("a.txt", "one").unwrap();
        out.finish().unwrap();
        let mut out = OutDir::create(dir.path()).unwrap();
        out.write("b.txt", "two").unwrap();
        out.finish().unwrap();
        let m: BTreeMap<String, String> =
            serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST)).unwrap()).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m["a.txt"], sha256_hex("one"));
    }
}
