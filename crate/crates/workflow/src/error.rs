use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::resolve::UnresolvedTask;

/// Failure of one workflow stage. Plan and resolve failures abort before
/// anything runs; execute failures are recorded in the output next to the
/// trace that led to them.
#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WorkflowError {
    #[error("planner failed: {reason}")]
    PlannerFailed { reason: String },
    #[error("invalid plan: {reason}")]
    PlanInvalid { reason: String },
    #[error("{0}")]
    UnresolvedTask(UnresolvedTask),
    #[error("authorization denied for {binding}: {reason}")]
    AuthDenied { binding: String, reason: String },
    #[error("{binding} failed after {attempts} attempt(s): {error_class}: {last_error}")]
    ExecFailed {
        binding: String,
        attempts: u32,
        error_class: String,
        last_error: String,
    },
}

impl WorkflowError {
    pub fn class(&self) -> &'static str {
        match self {
            WorkflowError::PlannerFailed { .. } => "PLANNER_FAILED",
            WorkflowError::PlanInvalid { .. } => "PLAN_INVALID",
            WorkflowError::UnresolvedTask(_) => "UNRESOLVED_TASK",
            WorkflowError::AuthDenied { .. } => "AUTH_DENIED",
            WorkflowError::ExecFailed { .. } => "EXEC_FAILED",
        }
    }

    pub(crate) fn invalid(reason: impl Into<String>) -> Self {
        WorkflowError::PlanInvalid { reason: reason.into() }
    }
}
