//! Server-side dispatch for the MCP primitives.

use serde_json::{json, Map, Value};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, RwLock};
use thiserror::Error;

use crate::descriptor::{DescriptorError, PromptDescriptor, ResourceDescriptor, ServerIdentity, ToolDescriptor};
use crate::envelope::{decode_message, encode_message, RequestId, RpcEnvelope};
use crate::error::{ErrorCode, ErrorObject};
use crate::schema;
use crate::session::{Lifecycle, SessionError, SessionHandle, SessionTable, TransportKind};
use crate::{PROTOCOL_VERSION, TOOLS_LIST_CHANGED};

pub const DEFAULT_PAGE_SIZE: usize = 50;
const DEFAULT_SESSION_LIMIT: usize = 1024;

/// A tool-level failure. Reported to the caller as `isError: true` with the
/// message as diagnostic text, never as a protocol error.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolFailure {
    pub message: String,
    pub details: Map<String, Value>,
}

impl ToolFailure {
    pub fn new(message: impl Into<String>) -> Self {
        let mut message = message.into();
        if message.is_empty() {
            message = "tool failed".into();
        }
        Self {
            message,
            details: Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.details.insert(key.to_string(), value.into());
        self
    }
}

impl fmt::Display for ToolFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Outcome of `tools/call`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolResult {
    pub structured: Value,
    pub is_error: bool,
    pub text: String,
}

impl ToolResult {
    pub fn success(structured: Value) -> Self {
        let text = serde_json::to_string(&structured).unwrap_or_default();
        Self {
            structured,
            is_error: false,
            text,
        }
    }

    pub fn failure(failure: ToolFailure) -> Self {
        let mut obj = failure.details;
        obj.insert("error".into(), Value::String(failure.message.clone()));
        Self {
            structured: Value::Object(obj),
            is_error: true,
            text: failure.message,
        }
    }

    pub fn to_value(&self) -> Value {
        json!({
            "content": [{"type": "text", "text": self.text}],
            "structuredContent": self.structured,
            "isError": self.is_error,
        })
    }

    pub fn from_value(value: &Value) -> Option<Self> {
        let is_error = value.get("isError").and_then(Value::as_bool).unwrap_or(false);
        let text = value
            .get("content")
            .and_then(Value::as_array)
            .and_then(|c| c.first())
            .and_then(|c| c.get("text"))
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string();
        let structured = value.get("structuredContent").cloned().unwrap_or(Value::Null);
        Some(Self {
            structured,
            is_error,
            text,
        })
    }
}

/// Context passed to tool handlers.
pub struct CallContext<'a> {
    server: &'a McpServer,
    session: Option<&'a SessionHandle>,
}

impl<'a> CallContext<'a> {
    pub fn server(&self) -> &'a McpServer {
        self.server
    }

    pub fn session_id(&self) -> Option<&'a str> {
        self.session.map(SessionHandle::id)
    }

    /// Queue a notification on the calling session only.
    pub fn notify_caller(&self, method: &str, params: Value) -> bool {
        self.session
            .and_then(|s| s.push(RpcEnvelope::notification(method, params)))
            .is_some()
    }
}

pub trait ToolHandler: Send + Sync {
    fn call(&self, ctx: &CallContext<'_>, args: &Value) -> Result<Value, ToolFailure>;
}

impl<F> ToolHandler for F
where
    F: Fn(&CallContext<'_>, &Value) -> Result<Value, ToolFailure> + Send + Sync,
{
    fn call(&self, ctx: &CallContext<'_>, args: &Value) -> Result<Value, ToolFailure> {
        self(ctx, args)
    }
}

/// Checks a bearer grant against a tool's required scope. Implemented by the
/// deployment's token service.
pub trait GrantVerifier: Send + Sync {
    fn verify(&self, token: Option<&str>, scope: &str) -> Result<(), String>;
}

pub type ResourceReader = dyn Fn() -> String + Send + Sync;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("tool {0:?} is already registered")]
    DuplicateTool(String),
    #[error("resource {0:?} is already registered")]
    DuplicateResource(String),
    #[error("prompt {0:?} is already registered")]
    DuplicatePrompt(String),
    #[error(transparent)]
    Invalid(#[from] DescriptorError),
}

struct RegisteredTool {
    descriptor: ToolDescriptor,
    handler: Arc<dyn ToolHandler>,
}

#[derive(Default)]
struct ToolRegistry {
    order: Vec<RegisteredTool>,
    by_name: HashMap<String, usize>,
}

impl ToolRegistry {
    fn insert(&mut self, descriptor: ToolDescriptor, handler: Arc<dyn ToolHandler>) -> Result<(), RegistryError> {
        descriptor.validate()?;
        if self.by_name.contains_key(&descriptor.name) {
            return Err(RegistryError::DuplicateTool(descriptor.name));
        }
        self.by_name.insert(descriptor.name.clone(), self.order.len());
        self.order.push(RegisteredTool { descriptor, handler });
        Ok(())
    }
}

struct RegisteredResource {
    descriptor: ResourceDescriptor,
    reader: Arc<ResourceReader>,
}

pub struct ServerBuilder {
    server_id: String,
    version: String,
    auth_client_id: Option<String>,
    instructions: Option<String>,
    tools: Vec<(ToolDescriptor, Arc<dyn ToolHandler>)>,
    resources: Vec<RegisteredResource>,
    prompts: Vec<PromptDescriptor>,
    page_size: usize,
    session_limit: usize,
    verifier: Option<Arc<dyn GrantVerifier>>,
}

impl ServerBuilder {
    pub fn version(mut self, version: impl Into<String>) -> Self {
        self.version = version.into();
        self
    }

    pub fn auth_client_id(mut self, id: impl Into<String>) -> Self {
        self.auth_client_id = Some(id.into());
        self
    }

    pub fn instructions(mut self, text: impl Into<String>) -> Self {
        self.instructions = Some(text.into());
        self
    }

    pub fn tool(mut self, descriptor: ToolDescriptor, handler: impl ToolHandler + 'static) -> Self {
        self.tools.push((descriptor, Arc::new(handler)));
        self
    }

    pub fn tool_arc(mut self, descriptor: ToolDescriptor, handler: Arc<dyn ToolHandler>) -> Self {
        self.tools.push((descriptor, handler));
        self
    }

    pub fn resource(
        mut self,
        descriptor: ResourceDescriptor,
        reader: impl Fn() -> String + Send + Sync + 'static,
    ) -> Self {
        self.resources.push(RegisteredResource {
            descriptor,
            reader: Arc::new(reader),
        });
        self
    }

    pub fn prompt(mut self, prompt: PromptDescriptor) -> Self {
        self.prompts.push(prompt);
        self
    }

    pub fn page_size(mut self, page_size: usize) -> Self {
        self.page_size = page_size.max(1);
        self
    }

    pub fn session_limit(mut self, limit: usize) -> Self {
        self.session_limit = limit;
        self
    }

    pub fn verifier(mut self, verifier: Arc<dyn GrantVerifier>) -> Self {
        self.verifier = Some(verifier);
        self
    }

    pub fn build(self) -> Result<Arc<McpServer>, RegistryError> {
        let mut registry = ToolRegistry::default();
        for (descriptor, handler) in self.tools {
            registry.insert(descriptor, handler)?;
        }
        let mut seen = std::collections::HashSet::new();
        for r in &self.resources {
            r.descriptor.validate()?;
            if !seen.insert(r.descriptor.uri.clone()) {
                return Err(RegistryError::DuplicateResource(r.descriptor.uri.clone()));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for p in &self.prompts {
            p.validate()?;
            if !seen.insert(p.name.clone()) {
                return Err(RegistryError::DuplicatePrompt(p.name.clone()));
            }
        }
        let auth_client_id = self
            .auth_client_id
            .unwrap_or_else(|| format!("{}-client", self.server_id));
        Ok(Arc::new(McpServer {
            server_id: self.server_id,
            version: self.version,
            auth_client_id,
            instructions: self.instructions,
            tools: RwLock::new(registry),
            resources: self.resources,
            prompts: self.prompts,
            sessions: SessionTable::new(self.session_limit),
            page_size: self.page_size,
            verifier: self.verifier,
        }))
    }
}

/// One MCP server: its capabilities, resources, prompts and sessions.
pub struct McpServer {
    server_id: String,
    version: String,
    auth_client_id: String,
    instructions: Option<String>,
    tools: RwLock<ToolRegistry>,
    resources: Vec<RegisteredResource>,
    prompts: Vec<PromptDescriptor>,
    sessions: SessionTable,
    page_size: usize,
    verifier: Option<Arc<dyn GrantVerifier>>,
}

impl fmt::Debug for McpServer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("McpServer")
            .field("server_id", &self.server_id)
            .field("tools", &self.tool_names())
            .finish_non_exhaustive()
    }
}

fn method_error(code: ErrorCode, message: impl Into<String>) -> ErrorObject {
    ErrorObject::new(code, message)
}

impl McpServer {
    pub fn builder(server_id: impl Into<String>) -> ServerBuilder {
        ServerBuilder {
            server_id: server_id.into(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            auth_client_id: None,
            instructions: None,
            tools: Vec::new(),
            resources: Vec::new(),
            prompts: Vec::new(),
            page_size: DEFAULT_PAGE_SIZE,
            session_limit: DEFAULT_SESSION_LIMIT,
            verifier: None,
        }
    }

    pub fn server_id(&self) -> &str {
        &self.server_id
    }

    pub fn identity(&self) -> ServerIdentity {
        ServerIdentity {
            server_id: self.server_id.clone(),
            capability_names: self.tool_names(),
            auth_client_id: self.auth_client_id.clone(),
        }
    }

    pub fn requires_auth(&self) -> bool {
        self.verifier.is_some()
    }

    // ---- tool registry -------------------------------------------------

    fn registry(&self) -> std::sync::RwLockReadGuard<'_, ToolRegistry> {
        self.tools.read().unwrap_or_else(|p| p.into_inner())
    }

    pub fn tool_names(&self) -> Vec<String> {
        self.registry()
            .order
            .iter()
            .map(|t| t.descriptor.name.clone())
            .collect()
    }

    /// Current capability set in registration order.
    pub fn tools(&self) -> Vec<ToolDescriptor> {
        self.registry().order.iter().map(|t| t.descriptor.clone()).collect()
    }

    pub fn tool(&self, name: &str) -> Option<ToolDescriptor> {
        let reg = self.registry();
        reg.by_name.get(name).map(|&i| reg.order[i].descriptor.clone())
    }

    pub fn has_tool(&self, name: &str) -> bool {
        self.registry().by_name.contains_key(name)
    }

    pub fn tool_count(&self) -> usize {
        self.registry().order.len()
    }

    pub fn register_tool(
        &self,
        descriptor: ToolDescriptor,
        handler: Arc<dyn ToolHandler>,
    ) -> Result<(), RegistryError> {
        self.tools
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(descriptor, handler)
    }

    /// Add every tool whose name is not yet registered, under one exclusive
    /// lock. Existing tools are left untouched. Returns the names added.
    pub fn add_tools_if_absent(
        &self,
        tools: Vec<(ToolDescriptor, Arc<dyn ToolHandler>)>,
    ) -> Result<Vec<String>, RegistryError> {
        for (d, _) in &tools {
            d.validate()?;
        }
        let mut reg = self.tools.write().unwrap_or_else(|p| p.into_inner());
        let mut added = Vec::new();
        for (descriptor, handler) in tools {
            if reg.by_name.contains_key(&descriptor.name) {
                continue;
            }
            added.push(descriptor.name.clone());
            reg.insert(descriptor, handler)?;
        }
        Ok(added)
    }

    // ---- sessions ------------------------------------------------------

    pub fn open_session(&self, kind: TransportKind) -> Result<Arc<SessionHandle>, SessionError> {
        self.sessions.open(kind)
    }

    pub fn close_session(&self, id: &str) -> Result<(), SessionError> {
        self.sessions.close(id)
    }

    pub fn session(&self, id: &str) -> Result<Arc<SessionHandle>, SessionError> {
        self.sessions.get(id)
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    pub fn set_session_limit(&self, limit: usize) {
        self.sessions.set_limit(limit);
    }

    /// Deliver one `tools/list_changed` notification to every open session.
    /// Returns how many sessions received it.
    pub fn notify_tools_list_changed(&self) -> usize {
        self.broadcast(RpcEnvelope::notification(TOOLS_LIST_CHANGED, Value::Null))
    }

    pub fn broadcast(&self, envelope: RpcEnvelope) -> usize {
        self.sessions
            .open_sessions()
            .iter()
            .filter(|s| s.push(envelope.clone()).is_some())
            .count()
    }

    pub fn notify_session(&self, id: &str, envelope: RpcEnvelope) -> bool {
        self.sessions.get(id).ok().and_then(|s| s.push(envelope)).is_some()
    }

    // ---- dispatch ------------------------------------------------------

    /// Handle one decoded envelope on a session. Returns the response for
    /// requests, `None` for notifications and stray responses.
    pub fn handle(&self, session_id: &str, envelope: RpcEnvelope) -> Result<Option<RpcEnvelope>, SessionError> {
        let session = self.sessions.get(session_id)?;
        self.handle_on(&session, envelope)
    }

    pub fn handle_on(
        &self,
        session: &SessionHandle,
        envelope: RpcEnvelope,
    ) -> Result<Option<RpcEnvelope>, SessionError> {
        if session.is_closed() {
            return Err(SessionError::Closed(session.id().to_string()));
        }
        match envelope {
            RpcEnvelope::Request { id, method, params } => {
                let outcome = self.dispatch(session, &method, &params);
                Ok(Some(RpcEnvelope::Response { id: Some(id), outcome }))
            }
            // notifications/initialized and friends need no reply.
            RpcEnvelope::Notification { .. } | RpcEnvelope::Response { .. } => Ok(None),
        }
    }

    /// Decode, handle and encode one line of text.
    pub fn handle_text(&self, session_id: &str, text: &str) -> Result<Option<String>, SessionError> {
        let session = self.sessions.get(session_id)?;
        let reply = match decode_message(text) {
            Ok(envelope) => self.handle_on(&session, envelope)?,
            Err(err) => {
                if session.is_closed() {
                    return Err(SessionError::Closed(session.id().to_string()));
                }
                Some(RpcEnvelope::error(recover_id(text), err))
            }
        };
        Ok(reply.map(|r| encode_message(&r)))
    }

    fn dispatch(&self, session: &SessionHandle, method: &str, params: &Value) -> Result<Value, ErrorObject> {
        match method {
            "initialize" => return self.initialize(session, params),
            "ping" => return Ok(json!({})),
            _ => {}
        }
        if session.lifecycle() != Lifecycle::Initialized {
            return Err(method_error(
                ErrorCode::NotInitialized,
                format!("{method} before initialize"),
            ));
        }
        match method {
            "tools/list" => self.list_tools(params),
            "tools/call" => self.call_tool_request(session, params),
            "resources/list" => Ok(self.list_resources()),
            "resources/read" => self.read_resource_request(params),
            "prompts/list" => Ok(self.list_prompts()),
            "prompts/get" => self.get_prompt_request(params),
            other => Err(method_error(
                ErrorCode::MethodNotFound,
                format!("unknown method {other}"),
            )),
        }
    }

    fn initialize(&self, session: &SessionHandle, params: &Value) -> Result<Value, ErrorObject> {
        if session.lifecycle() != Lifecycle::Open {
            return Err(method_error(
                ErrorCode::AlreadyInitialized,
                "session already initialized",
            ));
        }
        session.set_lifecycle(Lifecycle::Initialized);
        let client = params.get("clientInfo").cloned().unwrap_or(Value::Null);
        let mut result = json!({
            "protocolVersion": PROTOCOL_VERSION,
            "serverInfo": {
                "name": self.server_id,
                "version": self.version,
            },
            "capabilities": {
                "tools": {"listChanged": true},
                "resources": {"listChanged": false, "subscribe": false},
                "prompts": {"listChanged": false},
            },
            "sessionId": session.id(),
            "authClientId": self.auth_client_id,
        });
        if let Some(instr) = &self.instructions {
            result["instructions"] = Value::String(instr.clone());
        }
        if !client.is_null() {
            result["clientInfo"] = client;
        }
        Ok(result)
    }

    /// One page of the current tool list.
    pub fn list_tools_page(&self, cursor: Option<&str>) -> Result<(Vec<ToolDescriptor>, Option<String>), ErrorObject> {
        let reg = self.registry();
        let start = match cursor {
            None => 0,
            Some(c) => match c.parse::<usize>() {
                Ok(n) if n <= reg.order.len() => n,
                _ => return Err(method_error(ErrorCode::InvalidCursor, format!("invalid cursor {c:?}"))),
            },
        };
        let end = (start + self.page_size).min(reg.order.len());
        let page = reg.order[start..end].iter().map(|t| t.descriptor.clone()).collect();
        let next = (end < reg.order.len()).then(|| end.to_string());
        Ok((page, next))
    }

    fn list_tools(&self, params: &Value) -> Result<Value, ErrorObject> {
        let cursor = match params.get("cursor") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.as_str()),
            Some(other) => {
                return Err(method_error(
                    ErrorCode::InvalidCursor,
                    format!("invalid cursor {other}"),
                ))
            }
        };
        let (page, next) = self.list_tools_page(cursor)?;
        let mut result = json!({ "tools": page });
        if let Some(next) = next {
            result["nextCursor"] = Value::String(next);
        }
        Ok(result)
    }

    fn call_tool_request(&self, session: &SessionHandle, params: &Value) -> Result<Value, ErrorObject> {
        let name = params.get("name").and_then(Value::as_str).ok_or_else(|| {
            ErrorObject::new(ErrorCode::InvalidArgs, "tools/call requires a string `name`")
                .with_data(json!({"fields": ["name"]}))
        })?;
        let args = params.get("arguments").cloned().unwrap_or_else(|| json!({}));
        let grant = params
            .get("_meta")
            .and_then(|m| m.get("authorization"))
            .and_then(Value::as_str);
        self.call_tool(Some(session), name, &args, grant).map(|r| r.to_value())
    }

    /// Invoke a tool directly. Protocol-level errors (unknown tool, bad
    /// arguments, missing scope) are `Err`; tool failures are `Ok` with
    /// `is_error` set.
    pub fn call_tool(
        &self,
        session: Option<&SessionHandle>,
        name: &str,
        args: &Value,
        grant: Option<&str>,
    ) -> Result<ToolResult, ErrorObject> {
        // Clone out of the registry so handlers may mutate it.
        let (descriptor, handler) = {
            let reg = self.registry();
            let Some(&idx) = reg.by_name.get(name) else {
                return Err(method_error(ErrorCode::UnknownTool, format!("unknown tool {name}"))
                    .with_data(json!({"tool": name})));
            };
            let t = &reg.order[idx];
            (t.descriptor.clone(), t.handler.clone())
        };

        if !args.is_object() {
            return Err(ErrorObject::new(ErrorCode::InvalidArgs, "arguments must be an object")
                .with_data(json!({"fields": []})));
        }
        if let Err(violations) = schema::validate(&descriptor.input_schema, args) {
            let fields: Vec<&str> = violations.iter().map(|v| v.path.as_str()).collect();
            let detail: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(ErrorObject::new(
                ErrorCode::InvalidArgs,
                format!("invalid arguments for {name}: {}", detail.join("; ")),
            )
            .with_data(json!({"fields": fields, "violations": detail})));
        }

        if let (Some(verifier), Some(scope)) = (&self.verifier, &descriptor.required_scope) {
            if let Err(reason) = verifier.verify(grant, scope) {
                return Err(ErrorObject::new(
                    ErrorCode::AuthDenied,
                    format!("{name} requires scope {scope}: {reason}"),
                )
                .with_data(json!({"scope": scope, "tool": name})));
            }
        }

        let ctx = CallContext { server: self, session };
        let result = match handler.call(&ctx, args) {
            Ok(value) => match schema::validate(&descriptor.output_schema, &value) {
                Ok(()) => ToolResult::success(value),
                Err(violations) => {
                    let detail: Vec<String> = violations.iter().map(ToString::to_string).collect();
                    ToolResult::failure(
                        ToolFailure::new(format!(
                            "{name} produced output violating its schema: {}",
                            detail.join("; ")
                        ))
                        .with("error_class", "OUTPUT_SCHEMA"),
                    )
                }
            },
            Err(failure) => ToolResult::failure(failure),
        };
        Ok(result)
    }

    // ---- resources -----------------------------------------------------

    pub fn resources(&self) -> Vec<ResourceDescriptor> {
        self.resources.iter().map(|r| r.descriptor.clone()).collect()
    }

    fn list_resources(&self) -> Value {
        json!({ "resources": self.resources() })
    }

    /// Current content and media type of a resource.
    pub fn read_resource(&self, uri: &str) -> Result<(String, String), ErrorObject> {
        let r = self
            .resources
            .iter()
            .find(|r| r.descriptor.uri == uri)
            .ok_or_else(|| method_error(ErrorCode::UnknownResource, format!("unknown resource {uri}")))?;
        Ok(((r.reader)(), r.descriptor.media_type.clone()))
    }

    fn read_resource_request(&self, params: &Value) -> Result<Value, ErrorObject> {
        let uri = params.get("uri").and_then(Value::as_str).ok_or_else(|| {
            ErrorObject::new(ErrorCode::InvalidArgs, "resources/read requires `uri`")
                .with_data(json!({"fields": ["uri"]}))
        })?;
        let (text, media_type) = self.read_resource(uri)?;
        Ok(json!({
            "contents": [{"uri": uri, "mimeType": media_type, "text": text}]
        }))
    }

    // ---- prompts -------------------------------------------------------

    pub fn prompts(&self) -> &[PromptDescriptor] {
        &self.prompts
    }

    fn list_prompts(&self) -> Value {
        json!({ "prompts": self.prompts })
    }

    pub fn get_prompt(&self, name: &str, params: &BTreeMap<String, String>) -> Result<String, ErrorObject> {
        let prompt = self
            .prompts
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| method_error(ErrorCode::UnknownPrompt, format!("unknown prompt {name}")))?;
        prompt.render(params).map_err(|missing| {
            ErrorObject::new(
                ErrorCode::MissingParam,
                format!("prompt {name} requires parameter {missing}"),
            )
            .with_data(json!({"param": missing}))
        })
    }

    fn get_prompt_request(&self, params: &Value) -> Result<Value, ErrorObject> {
        let name = params.get("name").and_then(Value::as_str).ok_or_else(|| {
            ErrorObject::new(ErrorCode::InvalidArgs, "prompts/get requires `name`")
                .with_data(json!({"fields": ["name"]}))
        })?;
        let args: BTreeMap<String, String> = params
            .get("arguments")
            .and_then(Value::as_object)
            .map(|m| {
                m.iter()
                    .map(|(k, v)| {
                        let s = match v {
                            Value::String(s) => s.clone(),
                            other => other.to_string(),
                        };
                        (k.clone(), s)
                    })
                    .collect()
            })
            .unwrap_or_default();
        let text = self.get_prompt(name, &args)?;
        let description = self
            .prompts
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.description.clone())
            .unwrap_or_default();
        Ok(json!({
            "description": description,
            "messages": [{"role": "user", "content": {"type": "text", "text": text}}]
        }))
    }
}

/// Best-effort id recovery from text that failed to decode as an envelope.
fn recover_id(text: &str) -> Option<RequestId> {
    let value: Value = serde_json::from_str(text).ok()?;
    serde_json::from_value(value.get("id")?.clone()).ok()
}
