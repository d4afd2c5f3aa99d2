//! Execution records: per-task outcomes and the ordered event trace.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;

use crate::error::WorkflowError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalStatus {
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Authorize,
    Invoke,
    Retry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    /// Sim-clock tick when the event was recorded.
    pub tick: u64,
    pub binding: String,
    pub kind: TraceKind,
    /// Invoke attempt the event belongs to; 0 for authorization.
    pub attempt: u32,
    pub outcome: String,
    #[serde(default)]
    pub detail: Value,
}

impl TraceEvent {
    /// Authorization outcomes that let the binding proceed.
    pub fn is_successful_authorization(&self) -> bool {
        self.kind == TraceKind::Authorize
            && matches!(
                self.outcome.as_str(),
                "acquired" | "held" | "escalated" | "reacquired" | "not_required"
            )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: String,
    pub server_id: String,
    pub capability: String,
    pub site_id: String,
    pub status: FinalStatus,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutput {
    pub status: FinalStatus,
    /// Executed tasks in plan order. Tasks after a failure are absent.
    pub tasks: Vec<TaskOutcome>,
    pub trace: Vec<TraceEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<WorkflowError>,
}

impl ExecutionOutput {
    pub fn succeeded(&self) -> bool {
        self.status == FinalStatus::Succeeded
    }

    pub fn task(&self, task_id: &str) -> Option<&TaskOutcome> {
        self.tasks.iter().find(|t| t.task_id == task_id)
    }

    pub fn results(&self) -> BTreeMap<&str, &Value> {
        self.tasks
            .iter()
            .filter_map(|t| t.result.as_ref().map(|r| (t.task_id.as_str(), r)))
            .collect()
    }

    /// Invoke attempts recorded for `binding`.
    pub fn attempts(&self, binding: &str) -> usize {
        self.trace
            .iter()
            .filter(|e| e.binding == binding && e.kind == TraceKind::Invoke)
            .count()
    }
}

/// Every binding's first invoke must come after a successful authorization
/// for that same binding. Returns the first offending event.
pub fn check_authorize_before_invoke(trace: &[TraceEvent]) -> Result<(), String> {
    let mut authorized = std::collections::BTreeSet::new();
    for e in trace {
        if e.is_successful_authorization() {
            authorized.insert(e.binding.as_str());
        }
        if e.kind == TraceKind::Invoke && !authorized.contains(e.binding.as_str()) {
            return Err(format!(
                "event {} invokes {} before it was authorized",
                e.seq, e.binding
            ));
        }
    }
    Ok(())
}

/// Per-binding tally used by reports.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BindingSummary {
    pub binding: String,
    pub authorizations: usize,
    pub attempts: usize,
    pub retries: usize,
    /// Outcome of the last invoke, or of the authorization if none ran.
    pub outcome: String,
}

/// Bindings in order of first appearance.
pub fn summarize(trace: &[TraceEvent]) -> Vec<BindingSummary> {
    let mut out: Vec<BindingSummary> = Vec::new();
    for e in trace {
        let idx = match out.iter().position(|s| s.binding == e.binding) {
            Some(i) => i,
            None => {
                out.push(BindingSummary {
                    binding: e.binding.clone(),
                    ..Default::default()
                });
                out.len() - 1
            }
        };
        let s = &mut out[idx];
        match e.kind {
            TraceKind::Authorize => {
                s.authorizations += 1;
                if s.attempts == 0 {
                    s.outcome = e.outcome.clone();
                }
            }
            TraceKind::Invoke => {
                s.attempts += 1;
                s.outcome = e.outcome.clone();
            }
            TraceKind::Retry => s.retries += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn ev(seq: u64, binding: &str, kind: TraceKind, attempt: u32, outcome: &str) -> TraceEvent {
        TraceEvent {
            seq,
            tick: 0,
            binding: binding.into(),
            kind,
            attempt,
            outcome: outcome.into(),
            detail: json!({}),
        }
    }

    #[test]
    fn ordering_check() {
        let good = vec![
            ev(0, "a", TraceKind::Authorize, 0, "acquired"),
            ev(1, "a", TraceKind::Invoke, 1, "failed"),
            ev(2, "a", TraceKind::Retry, 2, "scheduled"),
            ev(3, "a", TraceKind::Invoke, 2, "succeeded"),
        ];
        assert!(check_authorize_before_invoke(&good).is_ok());
        let denied_then_invoked = vec![
            ev(0, "b", TraceKind::Authorize, 0, "denied"),
            ev(1, "b", TraceKind::Invoke, 1, "failed"),
        ];
        assert!(check_authorize_before_invoke(&denied_then_invoked).is_err());
        let other_binding = vec![
            ev(0, "a", TraceKind::Authorize, 0, "held"),
            ev(1, "b", TraceKind::Invoke, 1, "succeeded"),
        ];
        assert!(check_authorize_before_invoke(&other_binding).is_err());
    }

    #[test]
    fn summary_counts_attempts() {
        let t = vec![
            ev(0, "a", TraceKind::Authorize, 0, "acquired"),
            ev(1, "a", TraceKind::Invoke, 1, "failed"),
            ev(2, "a", TraceKind::Retry, 2, "scheduled"),
            ev(3, "a", TraceKind::Invoke, 2, "succeeded"),
            ev(4, "b", TraceKind::Authorize, 0, "denied"),
        ];
        let s = summarize(&t);
        assert_eq!(s.len(), 2);
        assert_eq!(
            (s[0].attempts, s[0].retries, s[0].outcome.as_str()),
            (2, 1, "succeeded")
        );
        assert_eq!((s[1].attempts, s[1].outcome.as_str()), (0, "denied"));
        assert!(summarize(&[]).is_empty());
    }
}
