use anyhow::{anyhow, Context};
use scimcp_discovery::recall::evaluate_strategies;
use scimcp_discovery::{load_benchmark, load_corpus, DocStrategy, TrigramEmbedder};
use std::io::Write;
use std::path::PathBuf;

use crate::config::DeploymentConfig;
use crate::{ExitCodeExt, Failure, EXIT_INPUT, EXIT_MONOTONICITY};

#[derive(Debug, Default)]
pub struct BenchArgs {
    pub config: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub benchmark: Option<PathBuf>,
    /// Empty means all four.
    pub strategies: Vec<String>,
    pub ks: Vec<usize>,
    pub out: Option<PathBuf>,
}

pub fn run(args: BenchArgs) -> Result<(), Failure> {
    let cfg = match &args.config {
        Some(p) => DeploymentConfig::load(p).exit(EXIT_INPUT)?,
        None => DeploymentConfig::default(),
    };
    let corpus_path = args
        .corpus
        .or(cfg.discovery.corpus)
        .ok_or_else(|| anyhow!("--corpus is required"))
        .exit(EXIT_INPUT)?;
    let bench_path = args
        .benchmark
        .or(cfg.discovery.benchmark)
        .ok_or_else(|| anyhow!("--benchmark is required"))
        .exit(EXIT_INPUT)?;
    let strategies: Vec<DocStrategy> = if args.strategies.is_empty() {
        DocStrategy::ALL.to_vec()
    } else {
        args.strategies
            .iter()
            .map(|s| s.trim().parse::<DocStrategy>())
            .collect::<Result<_, _>>()
            .exit(EXIT_INPUT)?
    };
    let mut ks = args.ks;
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(Failure::new(EXIT_INPUT, anyhow!("--k needs at least one value")));
    }

    let corpus = load_corpus(&corpus_path)
        .with_context(|| format!("corpus {}", corpus_path.display()))
        .exit(EXIT_INPUT)?;
    let bench = load_benchmark(&bench_path)
        .with_context(|| format!("benchmark {}", bench_path.display()))
        .exit(EXIT_INPUT)?;
    let report = evaluate_strategies(&corpus, &TrigramEmbedder::default(), &bench, &strategies, &ks)
        .with_context(|| format!("benchmark {}", bench_path.display()))
        .exit(EXIT_INPUT)?;

    let out = args.out.unwrap_or_else(|| PathBuf::from("recall_report.json"));
    let text = serde_json::to_string_pretty(&report).expect("reports serialize");
    std::fs::write(&out, text + "\n")
        .with_context(|| format!("cannot write report {}", out.display()))
        .exit(EXIT_INPUT)?;

    let mut stdout = std::io::stdout().lock();
    let _ = write!(stdout, "{}", report.table());
    let _ = writeln!(stdout, "report: {}", out.display());
    if ks.contains(&5) {
        for (worse, better) in report.ordering_violations(5) {
            let _ = writeln!(stdout, "note: {better} scores below {worse} at k=5");
        }
    }
    let violations = report.monotonicity_violations();
    if !violations.is_empty() {
        let detail: Vec<String> = violations
            .iter()
            .map(|(s, a, b)| format!("{s} drops from k={a} to k={b}"))
            .collect();
        return Err(Failure::new(
            EXIT_MONOTONICITY,
            anyhow!("recall is not monotone in k: {}", detail.join("; ")),
        ));
    }
    Ok(())
}
