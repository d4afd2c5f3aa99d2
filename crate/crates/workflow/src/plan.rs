//! Abstract plans: ordered goals with label dependencies, not yet tied to
//! any server or site.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeSet;

use crate::error::WorkflowError;
use crate::template::referenced_labels;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPromptSpec {
    pub prompt_text: String,
    /// Pre-parsed goals for planners that do not interpret free text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structured_goals: Option<Vec<AbstractTask>>,
}

impl UserPromptSpec {
    pub fn new(prompt_text: impl Into<String>, goals: Vec<AbstractTask>) -> Self {
        Self {
            prompt_text: prompt_text.into(),
            structured_goals: Some(goals),
        }
    }
}

fn empty_object() -> Value {
    json!({})
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractTask {
    pub task_id: String,
    pub goal_kind: String,
    #[serde(default = "empty_object")]
    pub params: Value,
    /// Labels under which this task's result is published.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub produces: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub consumes: Vec<String>,
}

impl AbstractTask {
    pub fn new(task_id: impl Into<String>, goal_kind: impl Into<String>, params: Value) -> Self {
        Self {
            task_id: task_id.into(),
            goal_kind: goal_kind.into(),
            params,
            produces: Vec::new(),
            consumes: Vec::new(),
        }
    }

    pub fn produces(mut self, label: impl Into<String>) -> Self {
        self.produces.push(label.into());
        self
    }

    pub fn consumes(mut self, label: impl Into<String>) -> Self {
        self.consumes.push(label.into());
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AbstractPlan {
    pub tasks: Vec<AbstractTask>,
}

impl AbstractPlan {
    /// Dependency invariants: unique task ids, every consumed label produced
    /// by an earlier task, no label produced twice, and every `${label}`
    /// reference declared in `consumes`.
    pub fn validate(&self) -> Result<(), WorkflowError> {
        let mut ids = BTreeSet::new();
        let mut produced = BTreeSet::new();
        for t in &self.tasks {
            if t.task_id.trim().is_empty() {
                return Err(WorkflowError::invalid("task with empty task_id"));
            }
            if !ids.insert(t.task_id.as_str()) {
                return Err(WorkflowError::invalid(format!("duplicate task_id {}", t.task_id)));
            }
            if t.goal_kind.trim().is_empty() {
                return Err(WorkflowError::invalid(format!(
                    "task {} has an empty goal_kind",
                    t.task_id
                )));
            }
            if !t.params.is_object() {
                return Err(WorkflowError::invalid(format!(
                    "task {} params must be an object",
                    t.task_id
                )));
            }
            for label in &t.consumes {
                if !produced.contains(label.as_str()) {
                    return Err(WorkflowError::invalid(format!(
                        "task {} consumes label {label} that no earlier task produces",
                        t.task_id
                    )));
                }
            }
            for label in referenced_labels(&t.params) {
                if !t.consumes.contains(&label) {
                    return Err(WorkflowError::invalid(format!(
                        "task {} references ${{{label}}} without consuming it",
                        t.task_id
                    )));
                }
            }
            for label in &t.produces {
                if !produced.insert(label.as_str()) {
                    return Err(WorkflowError::invalid(format!("label {label} is produced twice")));
                }
            }
        }
        Ok(())
    }
}

/// Turns a user prompt into an abstract plan.
pub trait Planner: Send + Sync {
    fn name(&self) -> &str;
    fn plan(&self, prompt: &UserPromptSpec) -> Result<AbstractPlan, WorkflowError>;
}

/// Maps `structured_goals` one-to-one onto tasks and ignores the free text.
#[derive(Debug, Clone, Copy, Default)]
pub struct DeterministicPlanner;

impl Planner for DeterministicPlanner {
    fn name(&self) -> &str {
        "deterministic"
    }

    fn plan(&self, prompt: &UserPromptSpec) -> Result<AbstractPlan, WorkflowError> {
        let goals = prompt
            .structured_goals
            .clone()
            .ok_or_else(|| WorkflowError::PlannerFailed {
                reason: "the deterministic planner needs structured_goals".into(),
            })?;
        Ok(AbstractPlan { tasks: goals })
    }
}

/// Plan stage: run the planner and check the result.
pub fn plan(prompt: &UserPromptSpec, planner: &dyn Planner) -> Result<AbstractPlan, WorkflowError> {
    if prompt.prompt_text.trim().is_empty() {
        return Err(WorkflowError::PlannerFailed {
            reason: "empty prompt".into(),
        });
    }
    let p = planner.plan(prompt)?;
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prompt(goals: Vec<AbstractTask>) -> UserPromptSpec {
        UserPromptSpec::new("do the thing", goals)
    }

    #[test]
    fn empty_goals_give_empty_plan() {
        assert_eq!(
            plan(&prompt(vec![]), &DeterministicPlanner).unwrap(),
            AbstractPlan::default()
        );
    }

    #[test]
    fn order_is_preserved() {
        let goals = vec![
            AbstractTask::new("dl", "download", json!({})).produces("raw"),
            AbstractTask::new("al", "align", json!({"input": "${raw.path}"})).consumes("raw"),
        ];
        let p = plan(&prompt(goals.clone()), &DeterministicPlanner).unwrap();
        assert_eq!(p.tasks, goals);
    }

    #[test]
    fn dangling_label_is_invalid() {
        let goals = vec![AbstractTask::new("al", "align", json!({})).consumes("raw")];
        let err = plan(&prompt(goals), &DeterministicPlanner).unwrap_err();
        assert_eq!(err.class(), "PLAN_INVALID");
    }

    #[test]
    fn undeclared_reference_and_duplicates_are_invalid() {
        let undeclared = vec![
            AbstractTask::new("a", "x", json!({})).produces("l"),
            AbstractTask::new("b", "y", json!({"v": "${l}"})),
        ];
        assert_eq!(
            plan(&prompt(undeclared), &DeterministicPlanner).unwrap_err().class(),
            "PLAN_INVALID"
        );
        let twice = vec![
            AbstractTask::new("a", "x", json!({})).produces("l"),
            AbstractTask::new("b", "y", json!({})).produces("l"),
        ];
        assert_eq!(
            plan(&prompt(twice), &DeterministicPlanner).unwrap_err().class(),
            "PLAN_INVALID"
        );
        let ids = vec![
            AbstractTask::new("a", "x", json!({})),
            AbstractTask::new("a", "y", json!({})),
        ];
        assert_eq!(
            plan(&prompt(ids), &DeterministicPlanner).unwrap_err().class(),
            "PLAN_INVALID"
        );
    }

    #[test]
    fn missing_goals_or_text_fail_the_planner() {
        let free = UserPromptSpec {
            prompt_text: "compare assemblies".into(),
            structured_goals: None,
        };
        assert_eq!(
            plan(&free, &DeterministicPlanner).unwrap_err().class(),
            "PLANNER_FAILED"
        );
        let blank = UserPromptSpec::new("  ", vec![]);
        assert_eq!(
            plan(&blank, &DeterministicPlanner).unwrap_err().class(),
            "PLANNER_FAILED"
        );
    }
}
