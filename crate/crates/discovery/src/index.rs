//! Strategy-specific vector index and top-k retrieval.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::corpus::ToolDocument;
use crate::embed::{cosine, Embedder, EmbeddingVector};
use crate::error::DiscoveryError;

/// Which documentation tiers are concatenated, in order, before embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DocStrategy {
    NameOnly,
    NameDesc,
    NameDescHelp,
    NameDescHelpReadme,
}

impl DocStrategy {
    /// Strategies from fewest to most tiers.
    pub const ALL: [DocStrategy; 4] = [
        DocStrategy::NameOnly,
        DocStrategy::NameDesc,
        DocStrategy::NameDescHelp,
        DocStrategy::NameDescHelpReadme,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DocStrategy::NameOnly => "NAME_ONLY",
            DocStrategy::NameDesc => "NAME_DESC",
            DocStrategy::NameDescHelp => "NAME_DESC_HELP",
            DocStrategy::NameDescHelpReadme => "NAME_DESC_HELP_README",
        }
    }

    fn tiers(self) -> usize {
        self as usize + 1
    }

    /// The text embedded for `doc`: its first `tiers` documentation fields
    /// joined by newlines. Empty tiers are skipped.
    pub fn text(self, doc: &ToolDocument) -> String {
        [&doc.name, &doc.description, &doc.help_text, &doc.readme]
            .into_iter()
            .take(self.tiers())
            .filter(|t| !t.trim().is_empty())
            .map(String::as_str)
            .collect::<Vec<_>>()
            .join("\n")
    }
}

impl fmt::Display for DocStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DocStrategy {
    type Err = DiscoveryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.to_ascii_uppercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|st| st.name() == upper)
            .ok_or_else(|| DiscoveryError::UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub tool_id: String,
    pub vector: EmbeddingVector,
}

/// Immutable once built. Entries are kept in corpus order.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    pub strategy: DocStrategy,
    pub embedder_id: String,
    pub dim: usize,
    entries: Vec<IndexEntry>,
}

impl VectorIndex {
    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn vector(&self, tool_id: &str) -> Option<&EmbeddingVector> {
        self.entries.iter().find(|e| e.tool_id == tool_id).map(|e| &e.vector)
    }
}

pub fn build_index(
    corpus: &[ToolDocument],
    strategy: DocStrategy,
    embedder: &dyn Embedder,
) -> Result<VectorIndex, DiscoveryError> {
    if corpus.is_empty() {
        return Err(DiscoveryError::EmptyCorpus);
    }
    let entries = corpus
        .iter()
        .map(|doc| {
            Ok(IndexEntry {
                tool_id: doc.tool_id.clone(),
                vector: embedder.embed(&strategy.text(doc))?,
            })
        })
        .collect::<Result<Vec<_>, DiscoveryError>>()?;
    Ok(VectorIndex {
        strategy,
        embedder_id: embedder.id().to_string(),
        dim: embedder.dim(),
        entries,
    })
}

/// Scores are compared at this resolution so that mathematically equal
/// cosines, which can differ in the last ulp depending on summation order,
/// fall through to the tool id tie-break.
pub const SCORE_RESOLUTION: f64 = 1e-12;

pub fn rank_key(score: f64) -> i64 {
    (score / SCORE_RESOLUTION).round() as i64
}

/// Descending score, then ascending tool id.
fn rank_order(a: &(String, f64), b: &(String, f64)) -> Ordering {
    rank_key(b.1).cmp(&rank_key(a.1)).then_with(|| a.0.cmp(&b.0))
}

/// Top-`k` entries for an already-embedded query.
pub fn retrieve_vector(index: &VectorIndex, query: &EmbeddingVector, k: usize) -> Vec<(String, f64)> {
    let k = k.min(index.len());
    let mut top: Vec<(String, f64)> = Vec::with_capacity(k + 1);
    for e in &index.entries {
        let cand = (e.tool_id.clone(), cosine(query, &e.vector));
        // Insertion into a bounded sorted buffer.
        let pos = top.partition_point(|x| rank_order(x, &cand) == Ordering::Less);
        if pos < k {
            top.insert(pos, cand);
            top.truncate(k);
        }
    }
    top
}

pub fn retrieve(
    index: &VectorIndex,
    embedder: &dyn Embedder,
    query: &str,
    k: usize,
) -> Result<Vec<(String, f64)>, DiscoveryError> {
    if k < 1 {
        return Err(DiscoveryError::InvalidK(k as i64));
    }
    if query.trim().is_empty() {
        return Err(DiscoveryError::EmptyQuery);
    }
    let q = embedder.embed(query)?;
    Ok(retrieve_vector(index, &q, k))
}
