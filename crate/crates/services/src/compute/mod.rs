//! Simulated function-execution service.
//!
//! Each endpoint runs its queue FIFO, completing one task per tick. Outcomes
//! are computed at submission (every kind is deterministic) and revealed
//! when the clock reaches the task's completion tick.

pub mod catalog;
pub mod sandbox;

use scimcp_core::{schema, McpServer, ServerBuilder, TaskPolling, ToolDescriptor};
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use crate::args::{handler, opt_str, req_str, to_value};
use crate::clock::SimClock;
use crate::error::ServiceError;
use crate::fixture::{ComputeFixture, ComputeToolFixture};
pub use catalog::TaskKind;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub name: String,
    pub kind: TaskKind,
    pub params_schema: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TaskSpec {
    Catalog { name: String, args: Value },
    Expression { expression: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComputeStatus {
    Queued,
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone)]
struct TaskRecord {
    task_id: String,
    endpoint_id: String,
    spec: TaskSpec,
    outcome: Result<Value, String>,
    submitted_at: u64,
    completes_at: u64,
}

impl TaskRecord {
    fn status_at(&self, now: u64) -> ComputeStatus {
        if now >= self.completes_at {
            match self.outcome {
                Ok(_) => ComputeStatus::Succeeded,
                Err(_) => ComputeStatus::Failed,
            }
        } else if now + 1 >= self.completes_at && now > self.submitted_at {
            ComputeStatus::Running
        } else {
            ComputeStatus::Queued
        }
    }

    fn view(&self, now: u64) -> ComputeTask {
        let status = self.status_at(now);
        ComputeTask {
            task_id: self.task_id.clone(),
            endpoint_id: self.endpoint_id.clone(),
            spec: self.spec.clone(),
            status,
            result: match (&self.outcome, status) {
                (Ok(v), ComputeStatus::Succeeded) => Some(v.clone()),
                _ => None,
            },
            error_text: match (&self.outcome, status) {
                (Err(e), ComputeStatus::Failed) => Some(e.clone()),
                _ => None,
            },
            submitted_at: self.submitted_at,
            completes_at: self.completes_at,
        }
    }
}

/// Client-visible task state: `result` present iff succeeded, `error_text`
/// present iff failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComputeTask {
    pub task_id: String,
    pub endpoint_id: String,
    pub spec: TaskSpec,
    pub status: ComputeStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_text: Option<String>,
    pub submitted_at: u64,
    pub completes_at: u64,
}

#[derive(Debug, Clone)]
struct EndpointState {
    endpoint_id: String,
    site_id: String,
    catalog: BTreeMap<String, CatalogEntry>,
    queue: Vec<String>,
    last_completion: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EndpointView {
    pub endpoint_id: String,
    pub site_id: String,
    pub catalog: Vec<CatalogEntry>,
    pub pending: usize,
}

#[derive(Debug, Default)]
struct State {
    endpoints: BTreeMap<String, EndpointState>,
    tasks: BTreeMap<String, TaskRecord>,
    next_id: u64,
}

#[derive(Debug)]
pub struct ComputeService {
    state: RwLock<State>,
    clock: Arc<SimClock>,
}

impl ComputeService {
    pub fn new(clock: Arc<SimClock>) -> Self {
        Self {
            state: RwLock::new(State {
                next_id: 1,
                ..State::default()
            }),
            clock,
        }
    }

    pub fn from_fixture(fixture: &ComputeFixture, clock: Arc<SimClock>) -> Result<Self, ServiceError> {
        let svc = Self::new(clock);
        for ep in &fixture.endpoints {
            svc.add_endpoint(&ep.endpoint_id, &ep.site_id)?;
            for (name, kind) in &ep.catalog {
                svc.register_task(&ep.endpoint_id, name, kind, None)?;
            }
        }
        Ok(svc)
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, State> {
        self.state.read().unwrap_or_else(|p| p.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, State> {
        self.state.write().unwrap_or_else(|p| p.into_inner())
    }

    pub fn add_endpoint(&self, endpoint_id: &str, site_id: &str) -> Result<(), ServiceError> {
        let mut st = self.write();
        if st.endpoints.contains_key(endpoint_id) {
            return Err(ServiceError::InvalidArgument(format!(
                "duplicate endpoint {endpoint_id}"
            )));
        }
        st.endpoints.insert(
            endpoint_id.to_string(),
            EndpointState {
                endpoint_id: endpoint_id.to_string(),
                site_id: site_id.to_string(),
                catalog: BTreeMap::new(),
                queue: Vec::new(),
                last_completion: 0,
            },
        );
        Ok(())
    }

    pub fn register_task(
        &self,
        endpoint_id: &str,
        name: &str,
        kind: &str,
        params_schema: Option<Value>,
    ) -> Result<CatalogEntry, ServiceError> {
        self.clock.on_operation();
        let kind = TaskKind::parse(kind).ok_or_else(|| ServiceError::UnknownTaskKind(kind.to_string()))?;
        if !scimcp_core::descriptor::is_valid_tool_name(name) {
            return Err(ServiceError::InvalidArgument(format!(
                "task name {name:?} must match [a-z0-9_]+"
            )));
        }
        let mut st = self.write();
        let ep = st
            .endpoints
            .get_mut(endpoint_id)
            .ok_or_else(|| ServiceError::UnknownEndpoint(endpoint_id.to_string()))?;
        let entry = CatalogEntry {
            name: name.to_string(),
            kind,
            params_schema: params_schema.unwrap_or_else(|| kind.default_schema()),
        };
        ep.catalog.insert(name.to_string(), entry.clone());
        Ok(entry)
    }

    pub fn endpoints(&self) -> Vec<EndpointView> {
        let now = self.clock.on_operation();
        let st = self.read();
        st.endpoints
            .values()
            .map(|ep| EndpointView {
                endpoint_id: ep.endpoint_id.clone(),
                site_id: ep.site_id.clone(),
                catalog: ep.catalog.values().cloned().collect(),
                pending: ep.queue.iter().filter(|id| st.tasks[*id].completes_at > now).count(),
            })
            .collect()
    }

    pub fn submit(&self, endpoint_id: &str, spec: TaskSpec) -> Result<ComputeTask, ServiceError> {
        let now = self.clock.on_operation();
        let mut st = self.write();
        let ep = st
            .endpoints
            .get(endpoint_id)
            .ok_or_else(|| ServiceError::UnknownEndpoint(endpoint_id.to_string()))?;
        let outcome = match &spec {
            TaskSpec::Catalog { name, args } => {
                let entry = ep.catalog.get(name).ok_or_else(|| ServiceError::NotInCatalog {
                    endpoint: endpoint_id.to_string(),
                    task: name.clone(),
                })?;
                if let Err(violations) = schema::validate(&entry.params_schema, args) {
                    let detail: Vec<String> = violations.iter().map(ToString::to_string).collect();
                    return Err(ServiceError::InvalidArgument(format!(
                        "arguments for {name}: {}",
                        detail.join("; ")
                    )));
                }
                entry.kind.run(args)
            }
            TaskSpec::Expression { expression } => sandbox::eval(expression)
                .map(|v| json!({"value": v.to_json()}))
                .map_err(|e| e.to_string()),
        };
        let id = format!("task-{:06}", st.next_id);
        st.next_id += 1;
        let ep = st.endpoints.get_mut(endpoint_id).expect("checked above");
        let completes_at = now.max(ep.last_completion) + 1;
        ep.last_completion = completes_at;
        ep.queue.push(id.clone());
        let record = TaskRecord {
            task_id: id.clone(),
            endpoint_id: endpoint_id.to_string(),
            spec,
            outcome,
            submitted_at: now,
            completes_at,
        };
        let view = record.view(now);
        st.tasks.insert(id, record);
        Ok(view)
    }

    /// Submit a catalog task to the first endpoint (by id) at `site` that
    /// offers it.
    pub fn submit_at_site(&self, site: &str, task: &str, args: Value) -> Result<ComputeTask, ServiceError> {
        let endpoint = self
            .read()
            .endpoints
            .values()
            .find(|ep| ep.site_id == site && ep.catalog.contains_key(task))
            .map(|ep| ep.endpoint_id.clone())
            .ok_or_else(|| ServiceError::NoEndpointAtSite {
                site: site.to_string(),
                task: task.to_string(),
            })?;
        self.submit(
            &endpoint,
            TaskSpec::Catalog {
                name: task.to_string(),
                args,
            },
        )
    }

    pub fn status(&self, task_id: &str) -> Result<ComputeTask, ServiceError> {
        let now = self.clock.on_operation();
        self.read()
            .tasks
            .get(task_id)
            .map(|t| t.view(now))
            .ok_or_else(|| ServiceError::UnknownTask(task_id.to_string()))
    }

    pub fn result(&self, task_id: &str) -> Result<Value, ServiceError> {
        let view = self.status(task_id)?;
        match view.status {
            ComputeStatus::Succeeded => Ok(view.result.expect("succeeded tasks carry a result")),
            ComputeStatus::Failed => Err(ServiceError::TaskFailed {
                task: view.task_id,
                reason: view.error_text.unwrap_or_default(),
            }),
            _ => Err(ServiceError::ResultNotReady(view.task_id)),
        }
    }
}

fn polling() -> TaskPolling {
    TaskPolling {
        status_tool: "get_task_status".into(),
        result_tool: Some("get_task_result".into()),
    }
}

fn task_id_schema() -> Value {
    json!({
        "type": "object",
        "properties": {"task_id": {"type": "string"}},
        "required": ["task_id"],
        "additionalProperties": false
    })
}

fn submitted_schema() -> Value {
    json!({
        "type": "object",
        "properties": {"task_id": {"type": "string"}, "status": {"type": "string"}},
        "required": ["task_id"]
    })
}

/// Descriptor for a fixture-defined, site-targeted tool. The task argument
/// schema gains a required `site` property.
pub fn site_tool_descriptor(t: &ComputeToolFixture) -> ToolDescriptor {
    let mut schema = t
        .input_schema
        .clone()
        .unwrap_or_else(|| json!({"type": "object", "properties": {}}));
    if let Some(obj) = schema.as_object_mut() {
        obj.entry("properties")
            .or_insert_with(|| json!({}))
            .as_object_mut()
            .map(|p| p.insert("site".into(), json!({"type": "string"})));
        let required = obj.entry("required").or_insert_with(|| json!([]));
        if let Some(r) = required.as_array_mut() {
            if !r.iter().any(|v| v == "site") {
                r.push(json!("site"));
            }
        }
    }
    ToolDescriptor::new(t.name.clone(), t.description.clone())
        .with_input_schema(schema)
        .with_output_schema(submitted_schema())
        .with_requirements(t.requirements.clone())
        .with_scope("compute:write")
        .with_polling(polling())
}

pub fn server(service: Arc<ComputeService>, tools: &[ComputeToolFixture]) -> ServerBuilder {
    let s = service.clone();
    let mut b = McpServer::builder("compute")
        .instructions("Run catalog tasks and sandboxed expressions on remote endpoints, then poll for results.")
        .tool(
            ToolDescriptor::new(
                "list_endpoints",
                "List compute endpoints, their sites and task catalogs.",
            )
            .with_scope("compute:read"),
            handler(move |_, _| Ok(json!({"endpoints": to_value(&s.endpoints())}))),
        );
    let s = service.clone();
    b = b.tool(
        ToolDescriptor::new(
            "register_task",
            "Register a named catalog task of a given kind on an endpoint.",
        )
        .with_input_schema(json!({
            "type": "object",
            "properties": {
                "endpoint_id": {"type": "string"},
                "name": {"type": "string"},
                "kind": {"type": "string", "enum": TaskKind::ALL.iter().map(|k| k.name()).collect::<Vec<_>>()},
                "params_schema": {"type": "object"}
            },
            "required": ["endpoint_id", "name", "kind"],
            "additionalProperties": false
        }))
        .with_scope("compute:admin"),
        handler(move |_, args| {
            let entry = s.register_task(
                req_str(args, "endpoint_id")?,
                req_str(args, "name")?,
                req_str(args, "kind")?,
                args.get("params_schema").cloned(),
            )?;
            Ok(json!({"registered": to_value(&entry)}))
        }),
    );
    let s = service.clone();
    b = b.tool(
        ToolDescriptor::new(
            "submit_task",
            "Submit a catalog task with arguments, or a sandboxed arithmetic/string expression, to an endpoint.",
        )
        .with_input_schema(json!({
            "type": "object",
            "properties": {
                "endpoint_id": {"type": "string"},
                "task": {"type": "string"},
                "args": {"type": "object"},
                "expression": {"type": "string"}
            },
            "required": ["endpoint_id"],
            "additionalProperties": false
        }))
        .with_output_schema(submitted_schema())
        .with_scope("compute:write")
        .with_polling(polling()),
        handler(move |_, args| {
            let spec = match (opt_str(args, "task"), opt_str(args, "expression")) {
                (Some(name), None) => TaskSpec::Catalog {
                    name: name.to_string(),
                    args: args.get("args").cloned().unwrap_or_else(|| json!({})),
                },
                (None, Some(expression)) => TaskSpec::Expression {
                    expression: expression.to_string(),
                },
                _ => {
                    return Err(
                        ServiceError::InvalidArgument("give exactly one of 'task' or 'expression'".into()).into(),
                    )
                }
            };
            let t = s.submit(req_str(args, "endpoint_id")?, spec)?;
            Ok(json!({"task_id": t.task_id, "status": to_value(&t.status)}))
        }),
    );
    let s = service.clone();
    b = b.tool(
        ToolDescriptor::new(
            "get_task_status",
            "Report whether a compute task is queued, running, succeeded or failed.",
        )
        .with_input_schema(task_id_schema())
        .with_scope("compute:read"),
        handler(move |_, args| Ok(to_value(&s.status(req_str(args, "task_id")?)?))),
    );
    let s = service.clone();
    b = b.tool(
        ToolDescriptor::new("get_task_result", "Fetch the result of a finished compute task.")
            .with_input_schema(task_id_schema())
            .with_scope("compute:read"),
        handler(move |_, args| {
            let id = req_str(args, "task_id")?;
            Ok(json!({"task_id": id, "result": s.result(id)?}))
        }),
    );
    for t in tools {
        let s = service.clone();
        let task = t.task.clone();
        b = b.tool(
            site_tool_descriptor(t),
            handler(move |_, args| {
                let site = req_str(args, "site")?.to_string();
                let mut task_args = args.clone();
                if let Some(obj) = task_args.as_object_mut() {
                    obj.remove("site");
                }
                let view = s.submit_at_site(&site, &task, task_args)?;
                Ok(json!({"task_id": view.task_id, "status": to_value(&view.status)}))
            }),
        );
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    fn service() -> (ComputeService, Arc<SimClock>) {
        let clock = Arc::new(SimClock::manual());
        let svc = ComputeService::new(clock.clone());
        svc.add_endpoint("ep-a", "site-a").unwrap();
        svc.register_task("ep-a", "word_count", "word_count", None).unwrap();
        (svc, clock)
    }

    fn expr(e: &str) -> TaskSpec {
        TaskSpec::Expression { expression: e.into() }
    }

    #[test]
    fn expression_lifecycle() {
        let (svc, clock) = service();
        let t = svc.submit("ep-a", expr("2*(3+4)")).unwrap();
        assert_eq!(t.status, ComputeStatus::Queued);
        assert_eq!(
            svc.result(&t.task_id),
            Err(ServiceError::ResultNotReady(t.task_id.clone()))
        );
        clock.advance(1);
        assert_eq!(svc.result(&t.task_id).unwrap(), json!({"value": 14}));
    }

    #[test]
    fn catalog_word_count() {
        let (svc, clock) = service();
        let t = svc
            .submit(
                "ep-a",
                TaskSpec::Catalog {
                    name: "word_count".into(),
                    args: json!({"text": "a b a"}),
                },
            )
            .unwrap();
        clock.advance(1);
        assert_eq!(svc.result(&t.task_id).unwrap(), json!({"a": 2, "b": 1}));
    }

    #[test]
    fn malformed_expression_fails_with_position() {
        let (svc, clock) = service();
        let t = svc.submit("ep-a", expr("2*(")).unwrap();
        clock.advance(1);
        let v = svc.status(&t.task_id).unwrap();
        assert_eq!(v.status, ComputeStatus::Failed);
        assert!(v.result.is_none());
        assert!(v.error_text.unwrap().contains("position 3"));
    }

    #[test]
    fn fifo_one_per_tick() {
        let (svc, clock) = service();
        let ids: Vec<_> = (0..3)
            .map(|i| svc.submit("ep-a", expr(&format!("{i}+1"))).unwrap().task_id)
            .collect();
        let done = |svc: &ComputeService| {
            ids.iter()
                .filter(|id| svc.status(id).unwrap().status == ComputeStatus::Succeeded)
                .count()
        };
        assert_eq!(done(&svc), 0);
        clock.advance(1);
        assert_eq!(done(&svc), 1);
        assert_eq!(svc.status(&ids[1]).unwrap().status, ComputeStatus::Running);
        assert_eq!(svc.status(&ids[2]).unwrap().status, ComputeStatus::Queued);
        clock.advance(1);
        assert_eq!(done(&svc), 2);
        clock.advance(1);
        assert_eq!(done(&svc), 3);
    }

    #[test]
    fn errors() {
        let (svc, _) = service();
        assert!(matches!(
            svc.submit("nope", expr("1")),
            Err(ServiceError::UnknownEndpoint(_))
        ));
        assert!(matches!(svc.status("task-999"), Err(ServiceError::UnknownTask(_))));
        assert!(matches!(
            svc.submit(
                "ep-a",
                TaskSpec::Catalog {
                    name: "stats".into(),
                    args: json!({})
                }
            ),
            Err(ServiceError::NotInCatalog { .. })
        ));
        assert!(matches!(
            svc.submit(
                "ep-a",
                TaskSpec::Catalog {
                    name: "word_count".into(),
                    args: json!({"txt": 1})
                }
            ),
            Err(ServiceError::InvalidArgument(_))
        ));
        assert!(matches!(
            svc.register_task("ep-a", "x", "shell", None),
            Err(ServiceError::UnknownTaskKind(_))
        ));
    }

    #[test]
    fn identical_specs_identical_results() {
        let run = || {
            let (svc, clock) = service();
            let t = svc.submit("ep-a", expr("upper('ab') + str(len('xyz'))")).unwrap();
            clock.advance(1);
            svc.result(&t.task_id).unwrap()
        };
        assert_eq!(run(), run());
        assert_eq!(run(), json!({"value": "AB3"}));
    }
}
