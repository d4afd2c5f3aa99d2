//! Corpus and benchmark files (JSON lines).

use scimcp_core::ToolDescriptor;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;

use crate::error::DiscoveryError;

/// One tool's documentation tiers plus the descriptor to materialize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolDocument {
    pub tool_id: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub help_text: String,
    #[serde(default)]
    pub readme: String,
    pub descriptor: ToolDescriptor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkCase {
    pub query: String,
    pub ground_truth_tool: String,
}

fn read(path: &Path) -> Result<String, DiscoveryError> {
    std::fs::read_to_string(path).map_err(|e| DiscoveryError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Non-blank lines with 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn parse_corpus(text: &str) -> Result<Vec<ToolDocument>, DiscoveryError> {
    let mut seen = HashSet::new();
    let mut docs = Vec::new();
    for (line, raw) in lines(text) {
        let doc: ToolDocument = serde_json::from_str(raw).map_err(|e| DiscoveryError::CorpusParse {
            line,
            message: e.to_string(),
        })?;
        if doc.name.trim().is_empty() {
            return Err(DiscoveryError::CorpusParse {
                line,
                message: "name must be non-empty".into(),
            });
        }
        if !scimcp_core::descriptor::is_valid_tool_name(&doc.tool_id) {
            return Err(DiscoveryError::CorpusParse {
                line,
                message: format!("tool_id {:?} must match [a-z0-9_]+", doc.tool_id),
            });
        }
        if !seen.insert(doc.tool_id.clone()) {
            return Err(DiscoveryError::DuplicateToolId {
                tool_id: doc.tool_id,
                line,
            });
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<ToolDocument>, DiscoveryError> {
    parse_corpus(&read(path.as_ref())?)
}

pub fn parse_benchmark(text: &str) -> Result<Vec<BenchmarkCase>, DiscoveryError> {
    lines(text)
        .map(|(line, raw)| {
            serde_json::from_str(raw).map_err(|e| DiscoveryError::BenchmarkParse {
                line,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn load_benchmark(path: impl AsRef<Path>) -> Result<Vec<BenchmarkCase>, DiscoveryError> {
    parse_benchmark(&read(path.as_ref())?)
}
