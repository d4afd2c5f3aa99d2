use anyhow::{anyhow, Context};
use scimcp_workflow::trace::{summarize, TraceEvent};
use serde_json::Value;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::{ExitCodeExt, Failure, EXIT_INPUT};

/// Table of per-binding attempts, authorizations and outcomes.
pub fn render(doc: &Value) -> anyhow::Result<String> {
    let events: Vec<TraceEvent> = serde_json::from_value(
        doc.get("trace")
            .cloned()
            .ok_or_else(|| anyhow!("trace document has no \"trace\" array"))?,
    )
    .context("malformed trace events")?;
    let rows = summarize(&events);
    let mut out = String::new();
    if let Some(name) = doc.get("scenario").and_then(Value::as_str) {
        let status = doc.get("status").and_then(Value::as_str).unwrap_or("unknown");
        let _ = writeln!(out, "scenario {name}: {status}");
    }
    let _ = writeln!(out, "{} bindings", rows.len());
    if rows.is_empty() {
        return Ok(out);
    }
    let width = rows
        .iter()
        .map(|r| r.binding.len())
        .max()
        .unwrap_or(0)
        .max("binding".len());
    let _ = writeln!(
        out,
        "{:<width$}  {:>8}  {:>14}  {:>7}  outcome",
        "binding", "attempts", "authorizations", "retries"
    );
    for r in &rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>8}  {:>14}  {:>7}  {}",
            r.binding, r.attempts, r.authorizations, r.retries, r.outcome
        );
    }
    if let Some(err) = doc.get("error").filter(|e| !e.is_null()) {
        let class = err.get("class").and_then(Value::as_str).unwrap_or("ERROR");
        let _ = writeln!(out, "error: {class}");
    }
    Ok(out)
}

pub fn run(path: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read trace {}", path.display()))
        .exit(EXIT_INPUT)?;
    let doc: Value = serde_json::from_str(&text)
        .with_context(|| format!("malformed trace {}", path.display()))
        .exit(EXIT_INPUT)?;
    let table = render(&doc)
        .with_context(|| path.display().to_string())
        .exit(EXIT_INPUT)?;
    let _ = std::io::stdout().lock().write_all(table.as_bytes());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_trace_has_zero_bindings() {
        let t = render(&json!({"trace": []})).unwrap();
        assert!(t.contains("0 bindings"));
    }

    #[test]
    fn retried_binding_shows_two_attempts() {
        let ev = |seq: u64, kind: &str, attempt: u32, outcome: &str| json!({"seq": seq, "tick": seq, "binding": "stage", "kind": kind, "attempt": attempt, "outcome": outcome, "detail": {}});
        let doc = json!({"trace": [
            ev(0, "authorize", 0, "acquired"),
            ev(1, "invoke", 1, "failed"),
            ev(2, "retry", 2, "scheduled"),
            ev(3, "invoke", 2, "succeeded"),
        ]});
        let t = render(&doc).unwrap();
        let row = t.lines().find(|l| l.starts_with("stage")).unwrap();
        let cols: Vec<&str> = row.split_whitespace().collect();
        assert_eq!(cols, ["stage", "2", "1", "1", "succeeded"]);
    }

    #[test]
    fn missing_trace_key_is_an_error() {
        assert!(render(&json!({"tasks": []})).is_err());
    }
}
