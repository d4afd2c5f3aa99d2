use scimcp_core::{CallContext, McpServer, ToolDescriptor, ToolFailure, ToolHandler};
use serde_json::{json, Value};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Echoes its arguments and pushes a `notifications/message` carrying them
/// to the calling session only.
struct Echo;

impl ToolHandler for Echo {
    fn call(&self, ctx: &CallContext<'_>, args: &Value) -> Result<Value, ToolFailure> {
        ctx.notify_caller("notifications/message", json!({"echo": args}));
        Ok(json!({"echo": args, "session": ctx.session_id()}))
    }
}

/// Per-session counter: the n-th call on a session returns n.
#[derive(Default)]
struct Counter(Mutex<HashMap<String, u64>>);

impl ToolHandler for Counter {
    fn call(&self, ctx: &CallContext<'_>, _: &Value) -> Result<Value, ToolFailure> {
        let mut m = self.0.lock().unwrap();
        let n = m.entry(ctx.session_id().unwrap_or_default().to_string()).or_default();
        *n += 1;
        Ok(json!({"n": *n}))
    }
}

pub fn server() -> Arc<McpServer> {
    McpServer::builder("test")
        .tool(ToolDescriptor::new("echo", "echo the arguments"), Echo)
        .tool(ToolDescriptor::new("next", "per-session counter"), Counter::default())
        .build()
        .unwrap()
}
