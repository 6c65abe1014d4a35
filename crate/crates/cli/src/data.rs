//! Corpus-level subcommands: validate, lint, kappa, split, render-gold.

use anyhow::anyhow;
use clap::Args;
use ropasum_core::corpus::{annotator_ids, corpus_kappa, lint_corpus};
use ropasum_core::experiments::gold_split;
use ropasum_core::gold::{render_gold as render_gold_lines, GoldLine};

use crate::env::parse_categories;
use crate::failure::{invalid, CliResult};
use crate::GlobalArgs;

#[derive(Debug, Args)]
pub struct KappaArgs {
    /// First annotator id (default: first in sorted order).
    #[arg(long)]
    pub a: Option<String>,
    /// Second annotator id (default: second in sorted order).
    #[arg(long)]
    pub b: Option<String>,
}

#[derive(Debug, Args)]
pub struct CategoryArgs {
    /// goal, step, dp, a comma-separated list, or all.
    #[arg(long, default_value = "all")]
    pub category: String,
}

#[derive(Debug, Args)]
pub struct RenderGoldArgs {
    /// Also print the lines on stdout.
    #[arg(long)]
    pub stdout: bool,
}

pub fn validate(g: &GlobalArgs) -> CliResult {
    let corpus = g.load_corpus()?;
    println!(
        "ok: {} scenarios, {} gold annotations, {} annotator records",
        corpus.scenarios.len(),
        corpus.gold_annotations.len(),
        corpus.annotator_records.len()
    );
    for (category, n) in corpus.census() {
        println!("{category}\t{n}");
    }
    Ok(())
}

pub fn lint(g: &GlobalArgs) -> CliResult {
    let corpus = g.load_corpus()?;
    let findings = lint_corpus(&corpus);
    for f in &findings {
        println!("{}\t{}\t{}\t{}", f.rule, f.source, f.item, f.message);
    }
    let mut out = g.out_dir()?;
    out.write_jsonl("lint.jsonl", &findings)?;
    out.finish()?;
    eprintln!("{} findings", findings.len());
    Ok(())
}

pub fn kappa(g: &GlobalArgs, args: &KappaArgs) -> CliResult {
    let corpus = g.load_corpus()?;
    let ids = annotator_ids(&corpus);
    let pick = |given: &Option<String>, i: usize| -> CliResult<String> {
        match given {
            Some(id) if ids.contains(id) => Ok(id.clone()),
            Some(id) => Err(invalid(anyhow!("no annotator {id:?} (have {ids:?})"))),
            None => ids
                .get(i)
                .cloned()
                .ok_or_else(|| invalid(anyhow!("need two annotators, corpus has {ids:?}"))),
        }
    };
    let a = pick(&args.a, 0)?;
    let b = pick(&args.b, 1)?;
    let (k, scenarios) = corpus_kappa(&corpus, &a, &b)?;
    println!("kappa({a}, {b}) = {k:.4} over {scenarios} scenarios");
    Ok(())
}

pub fn split(g: &GlobalArgs, args: &CategoryArgs) -> CliResult {
    let corpus = g.load_corpus()?;
    let mut out = g.out_dir()?;
    for category in parse_categories(&args.category)? {
        let split = gold_split(&corpus, category, g.seed)?;
        let lines = split.try_map(|e| Ok::<_, std::convert::Infallible>(GoldLine::from(e))).expect("infallible");
        out.write_json(&format!("split-{}.json", category.slug()), &lines)?;
        let (tr, va, te) = split.sizes();
        println!("{category}\ttrain {tr}\tvalidation {va}\ttest {te}");
    }
    out.finish()
}

pub fn render_gold(g: &GlobalArgs, args: &RenderGoldArgs) -> CliResult {
    let corpus = g.load_corpus()?;
    let lines: Vec<GoldLine> = render_gold_lines(&corpus)?.iter().map(GoldLine::from).collect();
    if args.stdout {
        for l in &lines {
            println!("{}", serde_json::to_string(l)?);
        }
    }
    let mut out = g.out_dir()?;
    out.write_jsonl("gold.jsonl", &lines)?;
    out.finish()?;
    eprintln!("{} gold examples", lines.len());
    Ok(())
}
