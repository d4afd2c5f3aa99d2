//! JSON-RPC 2.0 framing.
//!
//! Envelopes are compared structurally; the text form is one compact JSON
//! object per line with no embedded newlines.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::fmt;

use crate::error::ErrorObject;
use crate::JSONRPC_VERSION;

/// Opaque correlation id. JSON-RPC allows strings and integers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RequestId {
    Number(i64),
    String(String),
}

impl From<i64> for RequestId {
    fn from(v: i64) -> Self {
        RequestId::Number(v)
    }
}

impl From<&str> for RequestId {
    fn from(v: &str) -> Self {
        RequestId::String(v.to_string())
    }
}

impl From<String> for RequestId {
    fn from(v: String) -> Self {
        RequestId::String(v)
    }
}

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RequestId::Number(n) => write!(f, "{n}"),
            RequestId::String(s) => f.write_str(s),
        }
    }
}

/// A single protocol message.
///
/// A response carries exactly one of result or error, which the `outcome`
/// field makes unrepresentable otherwise. `id` on a response is `None` only
/// when the request could not be parsed far enough to recover it.
#[derive(Debug, Clone, PartialEq)]
pub enum RpcEnvelope {
    Request {
        id: RequestId,
        method: String,
        params: Value,
    },
    Notification {
        method: String,
        params: Value,
    },
    Response {
        id: Option<RequestId>,
        outcome: Result<Value, ErrorObject>,
    },
}

impl RpcEnvelope {
    pub fn request(id: impl Into<RequestId>, method: impl Into<String>, params: Value) -> Self {
        RpcEnvelope::Request {
            id: id.into(),
            method: method.into(),
            params,
        }
    }

    pub fn notification(method: impl Into<String>, params: Value) -> Self {
        RpcEnvelope::Notification {
            method: method.into(),
            params,
        }
    }

    pub fn result(id: RequestId, result: Value) -> Self {
        RpcEnvelope::Response {
            id: Some(id),
            outcome: Ok(result),
        }
    }

    pub fn error(id: Option<RequestId>, error: ErrorObject) -> Self {
        RpcEnvelope::Response {
            id,
            outcome: Err(error),
        }
    }

    pub fn method(&self) -> Option<&str> {
        match self {
            RpcEnvelope::Request { method, .. } | RpcEnvelope::Notification { method, .. } => Some(method),
            RpcEnvelope::Response { .. } => None,
        }
    }

    pub fn id(&self) -> Option<&RequestId> {
        match self {
            RpcEnvelope::Request { id, .. } => Some(id),
            RpcEnvelope::Response { id, .. } => id.as_ref(),
            RpcEnvelope::Notification { .. } => None,
        }
    }

    pub fn is_notification(&self) -> bool {
        matches!(self, RpcEnvelope::Notification { .. })
    }

    pub fn to_value(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("jsonrpc".into(), Value::from(JSONRPC_VERSION));
        match self {
            RpcEnvelope::Request { id, method, params } => {
                obj.insert("id".into(), serde_json::to_value(id).expect("id serializes"));
                obj.insert("method".into(), Value::from(method.as_str()));
                if !params.is_null() {
                    obj.insert("params".into(), params.clone());
                }
            }
            RpcEnvelope::Notification { method, params } => {
                obj.insert("method".into(), Value::from(method.as_str()));
                if !params.is_null() {
                    obj.insert("params".into(), params.clone());
                }
            }
            RpcEnvelope::Response { id, outcome } => {
                obj.insert(
                    "id".into(),
                    id.as_ref()
                        .map(|id| serde_json::to_value(id).expect("id serializes"))
                        .unwrap_or(Value::Null),
                );
                match outcome {
                    Ok(result) => {
                        obj.insert("result".into(), result.clone());
                    }
                    Err(error) => {
                        obj.insert("error".into(), serde_json::to_value(error).expect("error serializes"));
                    }
                }
            }
        }
        Value::Object(obj)
    }

    /// Interpret an already-parsed JSON value as an envelope.
    pub fn from_value(value: Value) -> Result<Self, ErrorObject> {
        let Value::Object(mut obj) = value else {
            return Err(ErrorObject::invalid_request("envelope must be a JSON object"));
        };
        match obj.get("jsonrpc") {
            Some(Value::String(v)) if v == JSONRPC_VERSION => {}
            Some(other) => {
                return Err(ErrorObject::invalid_request(format!(
                    "unsupported jsonrpc version {other}"
                )))
            }
            None => return Err(ErrorObject::invalid_request("missing jsonrpc field")),
        }

        let id = match obj.remove("id") {
            None => None,
            Some(Value::Null) => Some(None),
            Some(raw) => Some(Some(parse_id(raw)?)),
        };

        if let Some(method) = obj.remove("method") {
            let Value::String(method) = method else {
                return Err(ErrorObject::invalid_request("method must be a string"));
            };
            if method.is_empty() {
                return Err(ErrorObject::invalid_request("method must be non-empty"));
            }
            if obj.contains_key("result") || obj.contains_key("error") {
                return Err(ErrorObject::invalid_request("request carries result or error"));
            }
            let params = obj.remove("params").unwrap_or(Value::Null);
            if !matches!(params, Value::Null | Value::Object(_) | Value::Array(_)) {
                return Err(ErrorObject::invalid_request("params must be an object or array"));
            }
            return match id {
                None => Ok(RpcEnvelope::Notification { method, params }),
                Some(Some(id)) => Ok(RpcEnvelope::Request { id, method, params }),
                Some(None) => Err(ErrorObject::invalid_request("request id must not be null")),
            };
        }

        let result = obj.remove("result");
        let error = obj.remove("error");
        match (result, error) {
            (None, None) => Err(ErrorObject::invalid_request("missing method")),
            (Some(_), Some(_)) => Err(ErrorObject::invalid_request("response carries both result and error")),
            (result, error) => {
                let Some(id) = id else {
                    return Err(ErrorObject::invalid_request("response without id"));
                };
                let outcome = match (result, error) {
                    (Some(result), None) => {
                        if id.is_none() {
                            return Err(ErrorObject::invalid_request("successful response must carry an id"));
                        }
                        Ok(result)
                    }
                    (None, Some(error)) => {
                        let error: ErrorObject = serde_json::from_value(error)
                            .map_err(|e| ErrorObject::invalid_request(format!("malformed error object: {e}")))?;
                        if error.message.is_empty() {
                            return Err(ErrorObject::invalid_request("error message must be non-empty"));
                        }
                        Err(error)
                    }
                    _ => unreachable!(),
                };
                Ok(RpcEnvelope::Response { id, outcome })
            }
        }
    }
}

fn parse_id(raw: Value) -> Result<RequestId, ErrorObject> {
    match raw {
        Value::String(s) => Ok(RequestId::String(s)),
        Value::Number(n) => n
            .as_i64()
            .map(RequestId::Number)
            .ok_or_else(|| ErrorObject::invalid_request("numeric id must be an integer")),
        _ => Err(ErrorObject::invalid_request("id must be a string or integer")),
    }
}

/// Serialize to a single line (no trailing newline).
pub fn encode_message(msg: &RpcEnvelope) -> String {
    // serde_json escapes control characters inside strings, so the compact
    // form never contains a raw newline.
    serde_json::to_string(&msg.to_value()).expect("envelope value serializes")
}

pub fn decode_message(text: &str) -> Result<RpcEnvelope, ErrorObject> {
    let value: Value = serde_json::from_str(text.trim_end_matches(['\r', '\n']))
        .map_err(|e| ErrorObject::parse_error(format!("malformed JSON: {e}")))?;
    RpcEnvelope::from_value(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ErrorCode;
    use proptest::prelude::*;
    use serde_json::json;

    #[test]
    fn notification_has_no_id() {
        let msg = RpcEnvelope::notification(crate::TOOLS_LIST_CHANGED, Value::Null);
        let line = encode_message(&msg);
        assert!(!line.contains('\n'));
        let raw: Value = serde_json::from_str(&line).unwrap();
        assert!(raw.get("id").is_none());
        assert_eq!(decode_message(&line).unwrap(), msg);
    }

    #[test]
    fn request_round_trips() {
        let msg = RpcEnvelope::request("1", "tools/list", json!({}));
        assert_eq!(decode_message(&encode_message(&msg)).unwrap(), msg);
    }

    #[test]
    fn decodes_numeric_id_request() {
        let msg = decode_message(r#"{"jsonrpc":"2.0","id":1,"method":"tools/list"}"#).unwrap();
        assert_eq!(
            msg,
            RpcEnvelope::Request {
                id: RequestId::Number(1),
                method: "tools/list".into(),
                params: Value::Null
            }
        );
    }

    #[test]
    fn malformed_text_is_parse_error() {
        let err = decode_message("{not json").unwrap_err();
        assert!(err.is(ErrorCode::ParseError));
    }

    #[test]
    fn structural_violations_are_invalid_request() {
        for text in [
            r#"{"jsonrpc":"2.0","id":1}"#,
            r#"{"jsonrpc":"2.0","id":1,"params":{}}"#,
            r#"{"jsonrpc":"1.0","id":1,"method":"x"}"#,
            r#"{"id":1,"method":"x"}"#,
            r#"{"jsonrpc":"2.0","id":1,"result":1,"error":{"code":1,"message":"m"}}"#,
            r#"{"jsonrpc":"2.0","id":1.5,"method":"x"}"#,
            r#"{"jsonrpc":"2.0","id":null,"method":"x"}"#,
            r#"{"jsonrpc":"2.0","id":1,"method":7}"#,
            r#"{"jsonrpc":"2.0","id":1,"method":"x","params":3}"#,
            r#"{"jsonrpc":"2.0","result":{}}"#,
            r#"{"jsonrpc":"2.0","id":1,"error":{"code":1,"message":""}}"#,
            r#"[1,2]"#,
            r#""hello""#,
        ] {
            let err = decode_message(text).unwrap_err();
            assert!(err.is(ErrorCode::InvalidRequest), "{text} -> {err}");
        }
    }

    #[test]
    fn error_response_with_null_id_round_trips() {
        let msg = RpcEnvelope::error(None, ErrorObject::parse_error("bad"));
        assert_eq!(decode_message(&encode_message(&msg)).unwrap(), msg);
    }

    fn arb_json(depth: u32) -> impl Strategy<Value = Value> {
        let leaf = prop_oneof![
            Just(Value::Null),
            any::<bool>().prop_map(Value::from),
            any::<i64>().prop_map(Value::from),
            "[ -~\\n\\t]{0,12}".prop_map(Value::from),
        ];
        leaf.prop_recursive(depth, 24, 4, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
                prop::collection::btree_map("[a-z_]{1,6}", inner, 0..4)
                    .prop_map(|m| Value::Object(m.into_iter().collect())),
            ]
        })
    }

    fn arb_params() -> impl Strategy<Value = Value> {
        prop_oneof![
            Just(Value::Null),
            prop::collection::btree_map("[a-z_]{1,6}", arb_json(2), 0..4)
                .prop_map(|m| Value::Object(m.into_iter().collect())),
            prop::collection::vec(arb_json(2), 0..3).prop_map(Value::Array),
        ]
    }

    fn arb_id() -> impl Strategy<Value = RequestId> {
        prop_oneof![
            any::<i64>().prop_map(RequestId::Number),
            "[ -~]{0,10}".prop_map(RequestId::String),
        ]
    }

    fn arb_envelope() -> impl Strategy<Value = RpcEnvelope> {
        let code = prop::sample::select(ErrorCode::ALL.to_vec());
        prop_oneof![
            (arb_id(), "[a-z/_]{1,20}", arb_params()).prop_map(|(id, method, params)| RpcEnvelope::Request {
                id,
                method,
                params
            }),
            ("[a-z/_]{1,20}", arb_params()).prop_map(|(method, params)| RpcEnvelope::Notification { method, params }),
            (arb_id(), arb_json(3)).prop_map(|(id, v)| RpcEnvelope::result(id, v)),
            (
                prop::option::of(arb_id()),
                code,
                "[ -~]{1,20}",
                prop::option::of(arb_json(2))
            )
                .prop_map(|(id, code, msg, data)| {
                    let mut err = ErrorObject::new(code, msg);
                    // `data: null` and an absent `data` are the same wire state.
                    err.data = data.filter(|v| !v.is_null());
                    RpcEnvelope::error(id, err)
                }),
        ]
    }

    proptest! {
        #[test]
        fn round_trip_is_structural_identity(msg in arb_envelope()) {
            let line = encode_message(&msg);
            prop_assert!(!line.contains('\n'));
            prop_assert_eq!(decode_message(&line).unwrap(), msg);
        }
    }
}
