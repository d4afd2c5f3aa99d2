use scimcp_discovery::index::DocStrategy;
use scimcp_discovery::recall::evaluate_strategies;
use scimcp_discovery::{
    build_index, load_benchmark, load_corpus, retrieve, BenchmarkCase, ToolDocument, TrigramEmbedder,
};
use std::path::PathBuf;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn shipped() -> (Vec<ToolDocument>, Vec<BenchmarkCase>) {
    (
        load_corpus(data("corpus.jsonl")).unwrap(),
        load_benchmark(data("benchmark.jsonl")).unwrap(),
    )
}

/// Independent reference: re-embed every document with its own trigram
/// counter, score with an explicit cosine, and fully sort.
mod oracle {
    use std::collections::HashMap;

    fn fnv(bytes: &[u8]) -> u64 {
        bytes.iter().fold(0xcbf29ce484222325u64, |h, b| {
            (h ^ *b as u64).wrapping_mul(0x100000001b3)
        })
    }

    pub fn embed(text: &str) -> Vec<f64> {
        let lowered: String = text
            .to_lowercase()
            .chars()
            .map(|c| if c.is_alphanumeric() { c } else { ' ' })
            .collect();
        let words: Vec<&str> = lowered.split_whitespace().collect();
        let padded: Vec<char> = format!(" {} ", words.join(" ")).chars().collect();
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for w in padded.windows(3) {
            let s: String = w.iter().collect();
            *counts.entry((fnv(s.as_bytes()) % 512) as usize).or_default() += 1.0;
        }
        let mut v = vec![0.0; 512];
        for (i, c) in counts {
            v[i] = c;
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect()
    }

    pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    pub fn rank(docs: &[(String, Vec<f64>)], query: &str) -> Vec<(String, f64)> {
        let q = embed(query);
        let mut all: Vec<(String, f64)> = docs.iter().map(|(id, v)| (id.clone(), cosine(&q, v))).collect();
        // Compare at 1e-12 resolution, then by id.
        let key = |x: f64| (x * 1e12).round() as i64;
        all.sort_by(|a, b| key(b.1).cmp(&key(a.1)).then(a.0.cmp(&b.0)));
        all
    }
}

fn oracle_docs(corpus: &[ToolDocument], s: DocStrategy) -> Vec<(String, Vec<f64>)> {
    corpus
        .iter()
        .map(|d| (d.tool_id.clone(), oracle::embed(&s.text(d))))
        .collect()
}

#[test]
fn shipped_files_meet_size_requirements() {
    let (corpus, bench) = shipped();
    assert_eq!(corpus.len(), 20);
    assert!(bench.len() >= 50);
    assert!(corpus.iter().any(|d| d.tool_id == "gffcompare"));
}

#[test]
fn retrieve_equals_exhaustive_oracle_for_every_query_and_k() {
    let (corpus, bench) = shipped();
    let e = TrigramEmbedder::default();
    for s in DocStrategy::ALL {
        let idx = build_index(&corpus, s, &e).unwrap();
        let docs = oracle_docs(&corpus, s);
        for case in &bench {
            let full = oracle::rank(&docs, &case.query);
            for k in 1..=corpus.len() + 1 {
                let got = retrieve(&idx, &e, &case.query, k).unwrap();
                let want = &full[..k.min(full.len())];
                assert_eq!(got.len(), want.len());
                for (g, w) in got.iter().zip(want) {
                    assert_eq!(g.0, w.0, "{s} k={k} query={:?}", case.query);
                    assert!((g.1 - w.1).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn recall_matches_brute_force_recomputation() {
    let (corpus, bench) = shipped();
    let e = TrigramEmbedder::default();
    let ks: Vec<usize> = (1..=corpus.len()).collect();
    let report = evaluate_strategies(&corpus, &e, &bench, &DocStrategy::ALL, &ks).unwrap();
    for s in DocStrategy::ALL {
        let docs = oracle_docs(&corpus, s);
        for &k in &ks {
            let hits = bench
                .iter()
                .filter(|c| {
                    oracle::rank(&docs, &c.query)[..k]
                        .iter()
                        .any(|(id, _)| *id == c.ground_truth_tool)
                })
                .count();
            let brute = hits as f64 / bench.len() as f64;
            assert!((report.recall(s, k).unwrap() - brute).abs() <= 1e-12, "{s} k={k}");
        }
        assert_eq!(report.recall(s, corpus.len()), Some(1.0));
    }
}

#[test]
fn richer_documentation_never_hurts_recall_at_5() {
    let (corpus, bench) = shipped();
    let e = TrigramEmbedder::default();
    let ks: Vec<usize> = (1..=10).collect();
    let report = evaluate_strategies(&corpus, &e, &bench, &DocStrategy::ALL, &ks).unwrap();
    println!("{}", report.table());
    assert!(report.ordering_violations(5).is_empty(), "{}", report.table());
    assert!(report.monotonicity_violations().is_empty());
    assert!(report.recall(DocStrategy::NameOnly, 5) < report.recall(DocStrategy::NameDescHelpReadme, 5));
}

#[test]
fn assembler_comparison_query_finds_gffcompare() {
    let (corpus, _) = shipped();
    let e = TrigramEmbedder::default();
    let idx = build_index(&corpus, DocStrategy::NameDescHelpReadme, &e).unwrap();
    let hits = retrieve(
        &idx,
        &e,
        "I need a tool to compare and evaluate the accuracy of RNA-Seq transcript assemblers",
        5,
    )
    .unwrap();
    assert_eq!(hits[0].0, "gffcompare");
}

mod random_corpora {
    use super::*;
    use proptest::prelude::*;
    use scimcp_core::ToolDescriptor;

    const WORDS: [&str; 12] = [
        "align", "reads", "genome", "tree", "phylo", "quality", "variant", "assemble", "count", "plot", "rna",
        "protein",
    ];

    fn phrase() -> impl Strategy<Value = String> {
        proptest::collection::vec(proptest::sample::select(&WORDS[..]), 1..6).prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn retrieve_matches_oracle(descs in proptest::collection::vec(phrase(), 1..15), query in phrase(), k in 1usize..20) {
            let corpus: Vec<ToolDocument> = descs
                .iter()
                .enumerate()
                .map(|(i, d)| ToolDocument {
                    tool_id: format!("tool{i:02}"),
                    name: format!("tool{i:02}"),
                    description: d.clone(),
                    help_text: String::new(),
                    readme: String::new(),
                    descriptor: ToolDescriptor::new(format!("tool{i:02}"), d.clone()),
                })
                .collect();
            let e = TrigramEmbedder::default();
            let s = DocStrategy::NameDesc;
            let idx = build_index(&corpus, s, &e).unwrap();
            let full = oracle::rank(&oracle_docs(&corpus, s), &query);
            let got = retrieve(&idx, &e, &query, k).unwrap();
            let got_ids: Vec<&String> = got.iter().map(|h| &h.0).collect();
            let want_ids: Vec<&String> = full.iter().take(k).map(|h| &h.0).collect();
            prop_assert_eq!(got_ids, want_ids);
        }
    }
}
