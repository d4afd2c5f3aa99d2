//! Scripted end-to-end runs: a fixture, a prompt, a credential and the
//! expected outcome.
//!
//! Matching compares final status, error class, per-task status, attempts,
//! chosen site and selected result fields (by JSON pointer). Full traces are
//! not compared because fault injection changes attempt counts on purpose.

use scimcp_discovery::{load_corpus, DiscoveryError, DiscoveryServer, DocStrategy, TrigramEmbedder};
use scimcp_services::fixture::{FaultFixture, FixtureError};
use scimcp_services::{Deployment, Fixture};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

use crate::error::WorkflowError;
use crate::execute::{Environment, RetryPolicy, UserCredential};
use crate::plan::{DeterministicPlanner, UserPromptSpec};
use crate::run_workflow;
use crate::trace::{ExecutionOutput, FinalStatus};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("scenario {0} names no fixture and none was supplied")]
    NoFixture(String),
    #[error("fixture: {0}")]
    Fixture(#[from] FixtureError),
    #[error("discovery corpus: {0}")]
    Discovery(#[from] DiscoveryError),
}

fn default_strategy() -> DocStrategy {
    DocStrategy::NameDescHelpReadme
}

fn default_k() -> usize {
    scimcp_discovery::server::DEFAULT_K
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscoverySetup {
    pub corpus: PathBuf,
    #[serde(default = "default_strategy")]
    pub strategy: DocStrategy,
    #[serde(default = "default_k")]
    pub k: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskExpectation {
    #[serde(default)]
    pub status: Option<FinalStatus>,
    #[serde(default)]
    pub attempts: Option<u32>,
    #[serde(default)]
    pub site_id: Option<String>,
    /// JSON pointer into the task result mapped to the expected value.
    #[serde(default)]
    pub fields: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub status: FinalStatus,
    #[serde(default)]
    pub error_class: Option<String>,
    #[serde(default)]
    pub tasks: BTreeMap<String, TaskExpectation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Relative paths resolve against the scenario file's directory. May be
    /// omitted when the runner supplies one.
    #[serde(default)]
    pub fixture: Option<PathBuf>,
    /// Replaces the fixture's fault injection settings.
    #[serde(default)]
    pub faults: Option<FaultFixture>,
    #[serde(default)]
    pub discovery: Option<DiscoverySetup>,
    pub prompt: UserPromptSpec,
    pub credential: UserCredential,
    #[serde(default)]
    pub policy: RetryPolicy,
    pub expect: Expectation,
}

impl Scenario {
    pub fn from_json(text: &str, path: &Path) -> Result<Self, ScenarioError> {
        let mut s: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        s.policy.validate().map_err(|message| ScenarioError::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        s.fixture = s.fixture.map(|f| base.join(f));
        if let Some(d) = &mut s.discovery {
            d.corpus = base.join(&d.corpus);
        }
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    /// A fresh environment for this scenario.
    pub fn environment(&self, fixture_override: Option<&Path>) -> Result<Environment, ScenarioError> {
        let path = fixture_override
            .or(self.fixture.as_deref())
            .ok_or_else(|| ScenarioError::NoFixture(self.name.clone()))?;
        let mut fixture = Fixture::load(path)?;
        if let Some(f) = &self.faults {
            fixture.faults = f.clone();
        }
        let deployment = Deployment::from_fixture(fixture)?;
        let mut env = Environment::from_deployment(&deployment);
        if let Some(d) = &self.discovery {
            let corpus = load_corpus(&d.corpus)?;
            let server = DiscoveryServer::new(corpus, d.strategy, Arc::new(TrigramEmbedder::default()))?
                .builder()
                .version(env!("CARGO_PKG_VERSION"))
                .build()
                .expect("discovery server has one static tool");
            env = env.with_discovery(server, d.k);
        }
        Ok(env)
    }

    pub fn run(&self, fixture_override: Option<&Path>) -> Result<ScenarioRun, ScenarioError> {
        let env = self.environment(fixture_override)?;
        let outcome = run_workflow(
            &self.prompt,
            &DeterministicPlanner,
            &env,
            &self.credential,
            &self.policy,
        );
        let mismatches = self.expect.compare(&outcome);
        Ok(ScenarioRun {
            name: self.name.clone(),
            outcome,
            mismatches,
        })
    }
}

impl Expectation {
    /// Human-readable differences between this expectation and `outcome`.
    pub fn compare(&self, outcome: &Result<ExecutionOutput, WorkflowError>) -> Vec<String> {
        let mut diff = Vec::new();
        let (status, error, tasks) = match outcome {
            Ok(out) => (out.status, out.error.as_ref(), out.tasks.as_slice()),
            Err(e) => (FinalStatus::Failed, Some(e), &[][..]),
        };
        if status != self.status {
            let why = error.map(|e| format!(" ({}: {e})", e.class())).unwrap_or_default();
            diff.push(format!("status: expected {:?}, got {:?}{why}", self.status, status));
        }
        let class = error.map(WorkflowError::class);
        if let Some(want) = &self.error_class {
            if class != Some(want.as_str()) {
                diff.push(format!(
                    "error_class: expected {want}, got {}",
                    error.map_or("none".to_string(), |e| format!("{}: {e}", e.class()))
                ));
            }
        }
        for (id, want) in &self.tasks {
            let Some(got) = tasks.iter().find(|t| t.task_id == *id) else {
                diff.push(format!("task {id}: did not run"));
                continue;
            };
            if let Some(s) = want.status.filter(|s| *s != got.status) {
                diff.push(format!("task {id}: status expected {s:?}, got {:?}", got.status));
            }
            if let Some(a) = want.attempts.filter(|a| *a != got.attempts) {
                diff.push(format!("task {id}: attempts expected {a}, got {}", got.attempts));
            }
            if let Some(site) = want.site_id.as_ref().filter(|s| **s != got.site_id) {
                diff.push(format!("task {id}: site expected {site}, got {}", got.site_id));
            }
            let result = got.result.clone().unwrap_or(Value::Null);
            for (pointer, value) in &want.fields {
                match result.pointer(pointer) {
                    Some(v) if v == value => {}
                    Some(v) => diff.push(format!("task {id}: {pointer} expected {value}, got {v}")),
                    None => diff.push(format!("task {id}: {pointer} missing from result")),
                }
            }
        }
        diff
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub name: String,
    pub outcome: Result<ExecutionOutput, WorkflowError>,
    pub mismatches: Vec<String>,
}

impl ScenarioRun {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    /// The exported trace document. Contains no wall-clock data, so
    /// identical inputs give byte-identical output.
    pub fn trace_document(&self) -> Value {
        match &self.outcome {
            Ok(out) => json!({
                "scenario": self.name,
                "status": out.status,
                "error": out.error,
                "tasks": out.tasks,
                "trace": out.trace,
            }),
            Err(e) => json!({
                "scenario": self.name,
                "status": FinalStatus::Failed,
                "error": e,
                "tasks": [],
                "trace": [],
            }),
        }
    }
}
