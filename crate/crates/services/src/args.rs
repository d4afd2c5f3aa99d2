//! Argument accessors for tool handlers. Input schemas are validated before
//! handlers run, so these only guard against optional or loosely typed fields.

use scimcp_core::ToolFailure;
use serde_json::Value;

pub(crate) fn req_str<'a>(args: &'a Value, name: &str) -> Result<&'a str, ToolFailure> {
    args.get(name).and_then(Value::as_str).ok_or_else(|| {
        ToolFailure::new(format!("missing string argument {name}")).with("error_class", "INVALID_ARGUMENT")
    })
}

pub(crate) fn opt_str<'a>(args: &'a Value, name: &str) -> Option<&'a str> {
    args.get(name).and_then(Value::as_str)
}

pub(crate) fn opt_u64(args: &Value, name: &str) -> Option<u64> {
    args.get(name).and_then(Value::as_u64)
}

pub(crate) fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("service views serialize")
}

/// Pins a closure to the tool handler signature so argument and error types
/// are inferred.
pub(crate) fn handler<F>(f: F) -> F
where
    F: Fn(&scimcp_core::CallContext<'_>, &Value) -> Result<Value, ToolFailure> + Send + Sync,
{
    f
}
