//! Deterministic task kinds an endpoint can run.

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    WordCount,
    Checksum,
    SortLines,
    Stats,
    /// Stand-in for a scientific code: a stable digest of its inputs.
    Simulate,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [
        TaskKind::WordCount,
        TaskKind::Checksum,
        TaskKind::SortLines,
        TaskKind::Stats,
        TaskKind::Simulate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::WordCount => "word_count",
            TaskKind::Checksum => "checksum",
            TaskKind::SortLines => "sort_lines",
            TaskKind::Stats => "stats",
            TaskKind::Simulate => "simulate",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Argument schema each kind accepts by default.
    pub fn default_schema(self) -> Value {
        match self {
            TaskKind::WordCount | TaskKind::Checksum | TaskKind::SortLines => json!({
                "type": "object",
                "properties": {"text": {"type": "string"}},
                "required": ["text"]
            }),
            TaskKind::Stats => json!({
                "type": "object",
                "properties": {"values": {"type": "array", "items": {"type": "number"}, "minItems": 1}},
                "required": ["values"]
            }),
            TaskKind::Simulate => json!({"type": "object"}),
        }
    }

    pub fn run(self, args: &Value) -> Result<Value, String> {
        let text = || {
            args.get("text")
                .and_then(Value::as_str)
                .ok_or_else(|| format!("{} needs a string argument 'text'", self.name()))
        };
        match self {
            TaskKind::WordCount => {
                let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
                for w in text()?.split_whitespace() {
                    *counts.entry(w).or_default() += 1;
                }
                Ok(json!(counts))
            }
            TaskKind::Checksum => {
                let t = text()?;
                Ok(json!({"sha256": hex::encode(Sha256::digest(t.as_bytes())), "bytes": t.len()}))
            }
            TaskKind::SortLines => {
                let mut lines: Vec<&str> = text()?.lines().collect();
                lines.sort_unstable();
                Ok(json!({"lines": lines.len(), "text": lines.join("\n")}))
            }
            TaskKind::Stats => {
                let values: Vec<f64> = args
                    .get("values")
                    .and_then(Value::as_array)
                    .ok_or("stats needs a numeric array 'values'")?
                    .iter()
                    .map(|v| v.as_f64().ok_or("stats values must be numbers"))
                    .collect::<Result<_, _>>()?;
                if values.is_empty() {
                    return Err("stats needs at least one value".into());
                }
                let n = values.len() as f64;
                let sum: f64 = values.iter().sum();
                let mean = sum / n;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                Ok(json!({
                    "count": values.len(),
                    "sum": sum,
                    "mean": mean,
                    "min": values.iter().copied().fold(f64::INFINITY, f64::min),
                    "max": values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    "stddev": var.sqrt(),
                }))
            }
            TaskKind::Simulate => {
                // serde_json maps are ordered, so this encoding is canonical.
                let canonical = serde_json::to_string(args).expect("json values serialize");
                let digest = hex::encode(Sha256::digest(canonical.as_bytes()));
                let inputs: Map<String, Value> = args.as_object().cloned().unwrap_or_default();
                Ok(json!({
                    "digest": digest,
                    "inputs": inputs.keys().collect::<Vec<_>>(),
                    "score": u64::from_str_radix(&digest[..8], 16).expect("hex digest") % 1000,
                }))
            }
        }
    }
}
