//! Recall@k over a benchmark of (query, ground-truth tool) cases.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::corpus::{BenchmarkCase, ToolDocument};
use crate::embed::Embedder;
use crate::error::DiscoveryError;
use crate::index::{build_index, retrieve_vector, DocStrategy, VectorIndex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub embedder_id: String,
    pub case_count: usize,
    /// Recall of the primary strategy (the richest one evaluated).
    pub per_k: BTreeMap<usize, f64>,
    pub per_strategy: BTreeMap<DocStrategy, BTreeMap<usize, f64>>,
}

impl RecallReport {
    pub fn recall(&self, strategy: DocStrategy, k: usize) -> Option<f64> {
        self.per_strategy.get(&strategy)?.get(&k).copied()
    }

    /// Strategies whose recall drops as k grows, with the offending ks.
    pub fn monotonicity_violations(&self) -> Vec<(DocStrategy, usize, usize)> {
        let mut out = Vec::new();
        for (s, per_k) in &self.per_strategy {
            let ks: Vec<(&usize, &f64)> = per_k.iter().collect();
            for w in ks.windows(2) {
                if w[1].1 < w[0].1 {
                    out.push((*s, *w[0].0, *w[1].0));
                }
            }
        }
        out
    }

    /// Adjacent strategy pairs (in tier order) where the richer one scores
    /// lower at `k`.
    pub fn ordering_violations(&self, k: usize) -> Vec<(DocStrategy, DocStrategy)> {
        let present: Vec<(DocStrategy, f64)> = DocStrategy::ALL
            .into_iter()
            .filter_map(|s| self.recall(s, k).map(|r| (s, r)))
            .collect();
        present
            .windows(2)
            .filter(|w| w[1].1 < w[0].1)
            .map(|w| (w[0].0, w[1].0))
            .collect()
    }

    pub fn table(&self) -> String {
        let ks: Vec<usize> = self
            .per_strategy
            .values()
            .flat_map(|m| m.keys().copied())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut out = format!("{:<24}", "strategy");
        for k in &ks {
            let _ = write!(out, " {:>7}", format!("R@{k}"));
        }
        out.push('\n');
        for (s, per_k) in &self.per_strategy {
            let _ = write!(out, "{:<24}", s.name());
            for k in &ks {
                match per_k.get(k) {
                    Some(r) => {
                        let _ = write!(out, " {r:>7.4}");
                    }
                    None => out.push_str("       -"),
                }
            }
            out.push('\n');
        }
        let _ = writeln!(out, "cases: {}  embedder: {}", self.case_count, self.embedder_id);
        out
    }
}

fn check_cases(index: &VectorIndex, bench: &[BenchmarkCase]) -> Result<(), DiscoveryError> {
    for (i, case) in bench.iter().enumerate() {
        if index.vector(&case.ground_truth_tool).is_none() {
            return Err(DiscoveryError::UnknownGroundTruth {
                case: i + 1,
                tool_id: case.ground_truth_tool.clone(),
            });
        }
    }
    Ok(())
}

fn per_k(
    index: &VectorIndex,
    embedder: &dyn Embedder,
    bench: &[BenchmarkCase],
    ks: &[usize],
) -> Result<BTreeMap<usize, f64>, DiscoveryError> {
    check_cases(index, bench)?;
    let max_k = ks.iter().copied().max().unwrap_or(0);
    if let Some(&bad) = ks.iter().find(|&&k| k < 1) {
        return Err(DiscoveryError::InvalidK(bad as i64));
    }
    // Rank of each case's ground truth within the top max_k, if present.
    let mut ranks = Vec::with_capacity(bench.len());
    for case in bench {
        let q = embedder.embed(&case.query)?;
        let hits = retrieve_vector(index, &q, max_k);
        ranks.push(hits.iter().position(|(id, _)| *id == case.ground_truth_tool));
    }
    let n = bench.len().max(1) as f64;
    Ok(ks
        .iter()
        .map(|&k| {
            let found = ranks.iter().filter(|r| r.is_some_and(|r| r < k)).count();
            (k, found as f64 / n)
        })
        .collect())
}

pub fn evaluate_recall(
    index: &VectorIndex,
    embedder: &dyn Embedder,
    bench: &[BenchmarkCase],
    ks: &[usize],
) -> Result<RecallReport, DiscoveryError> {
    let r = per_k(index, embedder, bench, ks)?;
    Ok(RecallReport {
        embedder_id: index.embedder_id.clone(),
        case_count: bench.len(),
        per_k: r.clone(),
        per_strategy: [(index.strategy, r)].into(),
    })
}

/// Evaluate every strategy in `strategies`; `per_k` reports the last one.
pub fn evaluate_strategies(
    corpus: &[ToolDocument],
    embedder: &dyn Embedder,
    bench: &[BenchmarkCase],
    strategies: &[DocStrategy],
    ks: &[usize],
) -> Result<RecallReport, DiscoveryError> {
    let mut per_strategy = BTreeMap::new();
    let mut last = BTreeMap::new();
    for &s in strategies {
        let idx = build_index(corpus, s, embedder)?;
        last = per_k(&idx, embedder, bench, ks)?;
        per_strategy.insert(s, last.clone());
    }
    Ok(RecallReport {
        embedder_id: embedder.id().to_string(),
        case_count: bench.len(),
        per_k: last,
        per_strategy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::TrigramEmbedder;
    use scimcp_core::ToolDescriptor;

    fn corpus() -> Vec<ToolDocument> {
        [
            "align reads to a genome",
            "count words in text",
            "draw a phylogenetic tree",
            "relax crystal structure",
        ]
        .iter()
        .enumerate()
        .map(|(i, d)| ToolDocument {
            tool_id: format!("t{i}"),
            name: format!("t{i}"),
            description: d.to_string(),
            help_text: String::new(),
            readme: String::new(),
            descriptor: ToolDescriptor::new(format!("t{i}"), *d),
        })
        .collect()
    }

    #[test]
    fn own_text_queries_give_perfect_recall_at_one() {
        let e = TrigramEmbedder::default();
        let c = corpus();
        let idx = build_index(&c, DocStrategy::NameDesc, &e).unwrap();
        let bench: Vec<_> = c
            .iter()
            .map(|d| BenchmarkCase {
                query: DocStrategy::NameDesc.text(d),
                ground_truth_tool: d.tool_id.clone(),
            })
            .collect();
        let r = evaluate_recall(&idx, &e, &bench, &[1, 4]).unwrap();
        assert_eq!(r.per_k[&1], 1.0);
        assert_eq!(r.per_k[&4], 1.0);
        assert!(r.monotonicity_violations().is_empty());
    }

    #[test]
    fn k_equal_to_corpus_size_is_perfect() {
        let e = TrigramEmbedder::default();
        let c = corpus();
        let bench = vec![BenchmarkCase {
            query: "something unrelated entirely".into(),
            ground_truth_tool: "t3".into(),
        }];
        let r = evaluate_strategies(&c, &e, &bench, &DocStrategy::ALL, &[c.len()]).unwrap();
        for s in DocStrategy::ALL {
            assert_eq!(r.recall(s, c.len()), Some(1.0));
        }
    }

    #[test]
    fn unknown_ground_truth_names_case() {
        let e = TrigramEmbedder::default();
        let idx = build_index(&corpus(), DocStrategy::NameOnly, &e).unwrap();
        let bench = vec![
            BenchmarkCase {
                query: "q".into(),
                ground_truth_tool: "t0".into(),
            },
            BenchmarkCase {
                query: "q".into(),
                ground_truth_tool: "missing".into(),
            },
        ];
        assert_eq!(
            evaluate_recall(&idx, &e, &bench, &[1]),
            Err(DiscoveryError::UnknownGroundTruth {
                case: 2,
                tool_id: "missing".into()
            })
        );
    }

    #[test]
    fn report_serializes_strategy_names() {
        let e = TrigramEmbedder::default();
        let idx = build_index(&corpus(), DocStrategy::NameOnly, &e).unwrap();
        let bench = vec![BenchmarkCase {
            query: "genome".into(),
            ground_truth_tool: "t0".into(),
        }];
        let r = evaluate_recall(&idx, &e, &bench, &[1]).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert!(v["per_strategy"]["NAME_ONLY"]["1"].is_number());
        assert!(r.table().contains("NAME_ONLY"));
    }
}
