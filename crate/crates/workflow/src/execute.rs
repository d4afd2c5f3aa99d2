//! Two-phase execution: authorize each binding against the token service,
//! then invoke its capability, polling asynchronous tasks and retrying
//! failures the policy allows.

use scimcp_core::{LocalClient, McpServer, SiteSpec, ToolDescriptor};
use scimcp_services::auth::AuthDecision;
use scimcp_services::{AuthGrant, Credential, Deployment, ServiceError, SimClock, TokenService};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::error::WorkflowError;
use crate::resolve::{Binding, ConcretePlan, DiscoveryLink};
use crate::template::substitute;
use crate::trace::{ExecutionOutput, FinalStatus, TaskOutcome, TraceEvent, TraceKind};

/// Polls of a status tool before a task is declared stuck.
pub const POLL_LIMIT: u32 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_ticks: u64,
    pub retryable_error_classes: BTreeSet<String>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            backoff_ticks: 1,
            retryable_error_classes: ["TASK_FAILED", "RESULT_NOT_READY"].map(String::from).into(),
        }
    }
}

impl RetryPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_attempts < 1 {
            return Err("max_attempts must be at least 1".into());
        }
        Ok(())
    }

    pub fn retries(&self, class: &str) -> bool {
        self.retryable_error_classes.contains(class)
    }
}

fn yes() -> bool {
    true
}

/// The user's credential plus how grants may be widened during a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserCredential {
    pub user_id: String,
    pub secret: String,
    /// Scopes requested up front. Empty means acquire lazily per binding.
    #[serde(default)]
    pub initial_scopes: Vec<String>,
    #[serde(default = "yes")]
    pub allow_escalation: bool,
}

impl UserCredential {
    pub fn new(user_id: impl Into<String>, secret: impl Into<String>) -> Self {
        Self {
            user_id: user_id.into(),
            secret: secret.into(),
            initial_scopes: Vec::new(),
            allow_escalation: true,
        }
    }

    fn credential(&self) -> Credential {
        Credential {
            user_id: self.user_id.clone(),
            secret: self.secret.clone(),
        }
    }
}

/// Everything a workflow runs against.
#[derive(Clone)]
pub struct Environment {
    /// In registration order.
    pub servers: Vec<Arc<McpServer>>,
    pub sites: Vec<SiteSpec>,
    pub discovery: Option<DiscoveryLink>,
    pub auth: Arc<TokenService>,
    pub clock: Arc<SimClock>,
}

impl Environment {
    pub fn from_deployment(d: &Deployment) -> Self {
        Self {
            servers: d.servers().to_vec(),
            sites: d.sites().to_vec(),
            discovery: None,
            auth: d.auth.clone(),
            clock: d.clock.clone(),
        }
    }

    pub fn with_discovery(mut self, server: Arc<McpServer>, k: usize) -> Self {
        self.discovery = Some(DiscoveryLink { server, k });
        self
    }

    /// Registered servers, then the discovery server.
    pub fn server(&self, id: &str) -> Option<&Arc<McpServer>> {
        self.servers
            .iter()
            .chain(self.discovery.as_ref().map(|d| &d.server))
            .find(|s| s.server_id() == id)
    }
}

struct Failure {
    class: String,
    message: String,
    hint: Option<(String, Value)>,
}

impl Failure {
    fn new(class: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            class: class.into(),
            message: message.into(),
            hint: None,
        }
    }
}

struct Run<'a> {
    env: &'a Environment,
    user: &'a UserCredential,
    policy: &'a RetryPolicy,
    grant: Option<AuthGrant>,
    /// Binding whose calls are in flight.
    current: String,
    clients: HashMap<String, LocalClient>,
    labels: BTreeMap<String, Value>,
    trace: Vec<TraceEvent>,
    tasks: Vec<TaskOutcome>,
}

impl<'a> Run<'a> {
    fn event(&mut self, binding: &str, kind: TraceKind, attempt: u32, outcome: &str, detail: Value) {
        self.trace.push(TraceEvent {
            seq: self.trace.len() as u64,
            tick: self.env.clock.now(),
            binding: binding.to_string(),
            kind,
            attempt,
            outcome: outcome.to_string(),
            detail,
        });
    }

    fn outcome(
        &mut self,
        b: &Binding,
        status: FinalStatus,
        attempts: u32,
        result: Option<Value>,
        error: Option<String>,
    ) {
        self.tasks.push(TaskOutcome {
            task_id: b.task_id.clone(),
            server_id: b.server_id.clone(),
            capability: b.capability.clone(),
            site_id: b.site_id.clone(),
            status,
            attempts,
            result,
            error,
        });
    }

    /// Make sure the held grant carries every scope in `scopes`, returning
    /// how.
    fn obtain(&mut self, scopes: &[String]) -> Result<&'static str, ServiceError> {
        let auth = &self.env.auth;
        let cred = self.user.credential();
        let mut how = "held";
        if self.grant.is_none() && !self.user.initial_scopes.is_empty() {
            self.grant = Some(auth.acquire(&cred, &self.user.initial_scopes)?);
            how = "acquired";
        }
        let Some(g) = &self.grant else {
            self.grant = Some(auth.acquire(&cred, scopes)?);
            return Ok("acquired");
        };
        let mut missing = Vec::new();
        for scope in scopes {
            match auth.check(&g.token, scope) {
                Ok(AuthDecision::Allow) => {}
                Ok(AuthDecision::Deny) => missing.push(scope.clone()),
                Err(ServiceError::ExpiredGrant) => {
                    let mut all: Vec<String> = g.scopes.iter().cloned().collect();
                    all.extend(scopes.iter().cloned());
                    self.grant = Some(auth.acquire(&cred, &all)?);
                    return Ok("reacquired");
                }
                Err(e) => return Err(e),
            }
        }
        if missing.is_empty() {
            return Ok(how);
        }
        if !self.user.allow_escalation {
            return Err(ServiceError::AuthDenied(format!(
                "grant lacks {} and escalation is disabled",
                missing.join(", ")
            )));
        }
        let mut token = g.token.clone();
        for scope in &missing {
            let wider = auth.escalate(&token, scope)?;
            token = wider.token.clone();
            self.grant = Some(wider);
        }
        Ok("escalated")
    }

    /// Scopes a binding needs: its tool's plus those of any polling tools.
    fn scopes(server: &McpServer, tool: &ToolDescriptor) -> Vec<String> {
        let mut names = vec![tool.name.clone()];
        if let Some(p) = &tool.polling {
            names.push(p.status_tool.clone());
            names.extend(p.result_tool.clone());
        }
        let mut scopes: Vec<String> = names
            .iter()
            .filter_map(|n| server.tool(n).and_then(|t| t.required_scope))
            .collect();
        scopes.sort();
        scopes.dedup();
        scopes
    }

    fn authorize(&mut self, b: &Binding, server: &McpServer, tool: &ToolDescriptor) -> Result<(), WorkflowError> {
        let scopes = Self::scopes(server, tool);
        if scopes.is_empty() || !server.requires_auth() {
            self.event(&b.task_id, TraceKind::Authorize, 0, "not_required", json!({}));
            return Ok(());
        }
        match self.obtain(&scopes) {
            Ok(how) => {
                self.event(&b.task_id, TraceKind::Authorize, 0, how, json!({"scopes": scopes}));
                Ok(())
            }
            Err(e) => {
                let reason = e.to_string();
                self.event(
                    &b.task_id,
                    TraceKind::Authorize,
                    0,
                    "denied",
                    json!({"scopes": scopes, "error_class": e.class(), "reason": reason}),
                );
                Err(WorkflowError::AuthDenied {
                    binding: b.task_id.clone(),
                    reason,
                })
            }
        }
    }

    /// Replace a grant that has lapsed, for example during a long poll,
    /// with one carrying the same scopes.
    fn renew(&mut self, binding: &str) -> Result<(), Failure> {
        let Some(g) = &self.grant else { return Ok(()) };
        if self.env.clock.now() < g.expiry {
            return Ok(());
        }
        let scopes: Vec<String> = g.scopes.iter().cloned().collect();
        match self.env.auth.acquire(&self.user.credential(), &scopes) {
            Ok(fresh) => {
                self.grant = Some(fresh);
                self.event(
                    binding,
                    TraceKind::Authorize,
                    0,
                    "reacquired",
                    json!({"scopes": scopes}),
                );
                Ok(())
            }
            Err(e) => Err(Failure::new(e.class(), e.to_string())),
        }
    }

    fn call(&mut self, server: &Arc<McpServer>, tool: &str, args: Value) -> Result<Value, Failure> {
        if server.requires_auth() {
            let binding = self.current.clone();
            self.renew(&binding)?;
        }
        let id = server.server_id().to_string();
        if !self.clients.contains_key(&id) {
            let c = LocalClient::connect(server.clone()).map_err(|e| Failure::new("CONNECT_FAILED", e.to_string()))?;
            self.clients.insert(id.clone(), c);
        }
        let token = self.grant.as_ref().map(|g| g.token.clone());
        let result = self.clients[&id]
            .call_tool(tool, args, token.as_deref())
            .map_err(|e| Failure::new(e.kind().map_or("RPC_ERROR", |k| k.name()), e.message))?;
        if result.is_error {
            let class = result.structured["error_class"].as_str().unwrap_or("TOOL_ERROR");
            return Err(Failure::new(class, result.text));
        }
        Ok(result.structured)
    }

    /// One invoke: the call itself and, for task-starting tools, polling to a
    /// terminal state.
    fn attempt(
        &mut self,
        server: &Arc<McpServer>,
        tool: &ToolDescriptor,
        args: &Value,
    ) -> Result<(Value, Value), Failure> {
        let first = self.call(server, &tool.name, args.clone())?;
        let Some(polling) = &tool.polling else {
            return Ok((first, json!({})));
        };
        let task_id = first["task_id"]
            .as_str()
            .ok_or_else(|| Failure::new("MALFORMED_RESULT", format!("{} returned no task_id", tool.name)))?
            .to_string();
        for polls in 1..=POLL_LIMIT {
            self.env.clock.advance(1);
            let status = self.call(server, &polling.status_tool, json!({"task_id": task_id}))?;
            let detail = json!({"task_id": task_id, "polls": polls});
            match status["status"].as_str() {
                Some("succeeded") => {
                    let result = match &polling.result_tool {
                        Some(r) => self.call(server, r, json!({"task_id": task_id}))?,
                        None => status,
                    };
                    return Ok((result, detail));
                }
                Some("failed") => {
                    let reason = status["failure_reason"].as_str().unwrap_or("failed");
                    let text = status["failure_detail"]
                        .as_str()
                        .or_else(|| status["error_text"].as_str())
                        .unwrap_or(reason);
                    let mut f = Failure::new("TASK_FAILED", format!("task {task_id}: {reason}: {text}"));
                    let hint = &status["retry_hint"];
                    if let (Some(arg), Some(value)) = (hint["argument"].as_str(), hint.get("value")) {
                        f.hint = Some((arg.to_string(), value.clone()));
                    }
                    return Err(f);
                }
                _ => {}
            }
        }
        Err(Failure::new(
            "POLL_LIMIT",
            format!("task {task_id} still pending after {POLL_LIMIT} polls"),
        ))
    }

    fn binding(&mut self, b: &Binding) -> Result<(), WorkflowError> {
        let fail = |class: &str, message: String| WorkflowError::ExecFailed {
            binding: b.task_id.clone(),
            attempts: 0,
            error_class: class.into(),
            last_error: message,
        };
        let server = self
            .env
            .server(&b.server_id)
            .cloned()
            .ok_or_else(|| fail("UNKNOWN_SERVER", format!("server {} is not registered", b.server_id)))?;
        let tool = server.tool(&b.capability).ok_or_else(|| {
            fail(
                "UNKNOWN_TOOL",
                format!("{} is not live on {}", b.capability, b.server_id),
            )
        })?;

        self.current = b.task_id.clone();
        if let Err(e) = self.authorize(b, &server, &tool) {
            self.outcome(b, FinalStatus::Failed, 0, None, Some(e.to_string()));
            return Err(e);
        }
        let mut args = match substitute(&b.arguments, &self.labels) {
            Ok(a) => a,
            Err(msg) => {
                self.outcome(b, FinalStatus::Failed, 0, None, Some(msg.clone()));
                return Err(fail("BAD_REFERENCE", msg));
            }
        };

        let max = self.policy.max_attempts.max(1);
        let mut attempt = 1;
        loop {
            match self.attempt(&server, &tool, &args) {
                Ok((result, mut detail)) => {
                    detail["capability"] = json!(b.capability);
                    self.event(&b.task_id, TraceKind::Invoke, attempt, "succeeded", detail);
                    for label in &b.produces {
                        self.labels.insert(label.clone(), result.clone());
                    }
                    self.outcome(b, FinalStatus::Succeeded, attempt, Some(result), None);
                    return Ok(());
                }
                Err(f) => {
                    self.event(
                        &b.task_id,
                        TraceKind::Invoke,
                        attempt,
                        "failed",
                        json!({"capability": b.capability, "error_class": f.class, "message": f.message}),
                    );
                    if self.policy.retries(&f.class) && attempt < max {
                        let mut detail = json!({"error_class": f.class, "backoff_ticks": self.policy.backoff_ticks});
                        if let (Some((arg, value)), Some(obj)) = (&f.hint, args.as_object_mut()) {
                            obj.insert(arg.clone(), value.clone());
                            detail["applied_hint"] = json!({"argument": arg, "value": value});
                        }
                        self.event(&b.task_id, TraceKind::Retry, attempt + 1, "scheduled", detail);
                        self.env.clock.advance(self.policy.backoff_ticks);
                        attempt += 1;
                        continue;
                    }
                    let message = format!("{}: {}", f.class, f.message);
                    self.outcome(b, FinalStatus::Failed, attempt, None, Some(message));
                    return Err(if f.class == "AUTH_DENIED" {
                        WorkflowError::AuthDenied {
                            binding: b.task_id.clone(),
                            reason: f.message,
                        }
                    } else {
                        WorkflowError::ExecFailed {
                            binding: b.task_id.clone(),
                            attempts: attempt,
                            error_class: f.class,
                            last_error: f.message,
                        }
                    });
                }
            }
        }
    }
}

/// Execute stage. Bindings run in plan order and stop at the first failure,
/// which is recorded in the output alongside the trace.
pub fn execute(plan: &ConcretePlan, env: &Environment, user: &UserCredential, policy: &RetryPolicy) -> ExecutionOutput {
    let mut run = Run {
        env,
        user,
        policy,
        grant: None,
        current: String::new(),
        clients: HashMap::new(),
        labels: BTreeMap::new(),
        trace: Vec::new(),
        tasks: Vec::new(),
    };
    let mut error = None;
    for b in &plan.bindings {
        if let Err(e) = run.binding(b) {
            error = Some(e);
            break;
        }
    }
    ExecutionOutput {
        status: if error.is_none() {
            FinalStatus::Succeeded
        } else {
            FinalStatus::Failed
        },
        tasks: run.tasks,
        trace: run.trace,
        error,
    }
}
