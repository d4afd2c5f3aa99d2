//! In-process protocol client.
//!
//! Drives a server through full envelope dispatch on its own session, the
//! same path a remote transport takes minus the byte framing.

use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use crate::descriptor::ToolDescriptor;
use crate::envelope::{decode_message, encode_message, RpcEnvelope};
use crate::error::{ErrorCode, ErrorObject};
use crate::server::{McpServer, ToolResult};
use crate::session::{SessionHandle, TransportKind};
use crate::TOOLS_LIST_CHANGED;

pub struct LocalClient {
    server: Arc<McpServer>,
    session: Arc<SessionHandle>,
    next_id: AtomicI64,
    seen_event: AtomicI64,
}

impl LocalClient {
    /// Open a session and run the initialize handshake.
    pub fn connect(server: Arc<McpServer>) -> Result<Self, ErrorObject> {
        let session = server
            .open_session(TransportKind::InProcess)
            .map_err(|e| ErrorObject::new(ErrorCode::InvalidRequest, e.to_string()))?;
        let client = Self {
            server,
            session,
            next_id: AtomicI64::new(1),
            seen_event: AtomicI64::new(0),
        };
        client.request(
            "initialize",
            json!({
                "protocolVersion": crate::PROTOCOL_VERSION,
                "clientInfo": {"name": "scimcp-local", "version": env!("CARGO_PKG_VERSION")},
                "capabilities": {}
            }),
        )?;
        client.notify("notifications/initialized", Value::Null);
        Ok(client)
    }

    pub fn server(&self) -> &Arc<McpServer> {
        &self.server
    }

    pub fn session_id(&self) -> &str {
        self.session.id()
    }

    pub fn request(&self, method: &str, params: Value) -> Result<Value, ErrorObject> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        // Round-trip through the wire encoding so this path matches remote use.
        let line = encode_message(&RpcEnvelope::request(id, method, params));
        let reply = self
            .server
            .handle_text(self.session.id(), &line)
            .map_err(|e| ErrorObject::new(ErrorCode::InvalidRequest, e.to_string()))?
            .ok_or_else(|| ErrorObject::new(ErrorCode::InternalError, "no response"))?;
        match decode_message(&reply)? {
            RpcEnvelope::Response { outcome, .. } => outcome,
            other => Err(ErrorObject::new(
                ErrorCode::InternalError,
                format!("unexpected reply {other:?}"),
            )),
        }
    }

    pub fn notify(&self, method: &str, params: Value) {
        let _ = self
            .server
            .handle(self.session.id(), RpcEnvelope::notification(method, params));
    }

    /// Follow cursors until the full tool list is collected.
    pub fn list_tools(&self) -> Result<Vec<ToolDescriptor>, ErrorObject> {
        let mut tools = Vec::new();
        let mut cursor: Option<String> = None;
        loop {
            let params = match &cursor {
                Some(c) => json!({"cursor": c}),
                None => json!({}),
            };
            let page = self.request("tools/list", params)?;
            let batch: Vec<ToolDescriptor> = serde_json::from_value(page.get("tools").cloned().unwrap_or(json!([])))
                .map_err(|e| ErrorObject::new(ErrorCode::InternalError, e.to_string()))?;
            tools.extend(batch);
            match page.get("nextCursor").and_then(Value::as_str) {
                Some(next) => cursor = Some(next.to_string()),
                None => return Ok(tools),
            }
        }
    }

    pub fn call_tool(&self, name: &str, args: Value, grant: Option<&str>) -> Result<ToolResult, ErrorObject> {
        let mut params = json!({"name": name, "arguments": args});
        if let Some(token) = grant {
            params["_meta"] = json!({"authorization": token});
        }
        let raw = self.request("tools/call", params)?;
        ToolResult::from_value(&raw).ok_or_else(|| ErrorObject::new(ErrorCode::InternalError, "malformed tool result"))
    }

    pub fn read_resource(&self, uri: &str) -> Result<String, ErrorObject> {
        let raw = self.request("resources/read", json!({"uri": uri}))?;
        Ok(raw["contents"][0]["text"].as_str().unwrap_or_default().to_string())
    }

    pub fn get_prompt(&self, name: &str, args: &BTreeMap<String, String>) -> Result<String, ErrorObject> {
        let raw = self.request("prompts/get", json!({"name": name, "arguments": args}))?;
        Ok(raw["messages"][0]["content"]["text"]
            .as_str()
            .unwrap_or_default()
            .to_string())
    }

    /// Notifications received since the previous call.
    pub fn take_notifications(&self) -> Vec<RpcEnvelope> {
        let after = self.seen_event.load(Ordering::Acquire) as u64;
        let events = self.session.events_after(after);
        if let Some((last, _)) = events.last() {
            self.seen_event.store(*last as i64, Ordering::Release);
        }
        events.into_iter().map(|(_, e)| e).collect()
    }

    pub fn list_changed_count(&self) -> usize {
        self.take_notifications()
            .iter()
            .filter(|n| n.method() == Some(TOOLS_LIST_CHANGED))
            .count()
    }
}

impl Drop for LocalClient {
    fn drop(&mut self) {
        let _ = self.server.close_session(self.session.id());
    }
}
