//! A small JSON Schema subset validator for tool arguments and results.
//!
//! Supported keywords: `type` (string or list), `properties`, `required`,
//! `additionalProperties: false`, `items`, `enum`, `minimum`, `maximum`,
//! `minItems`. Unknown keywords are ignored.

use serde_json::Value;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaViolation {
    /// Dotted path to the offending value; empty for the root.
    pub path: String,
    pub message: String,
}

impl fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

pub fn validate(schema: &Value, value: &Value) -> Result<(), Vec<SchemaViolation>> {
    let mut out = Vec::new();
    check(schema, value, String::new(), &mut out);
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

fn type_matches(ty: &str, value: &Value) -> bool {
    match ty {
        "string" => value.is_string(),
        "integer" => value.is_i64() || value.is_u64(),
        "number" => value.is_number(),
        "boolean" => value.is_boolean(),
        "object" => value.is_object(),
        "array" => value.is_array(),
        "null" => value.is_null(),
        _ => true,
    }
}

fn join(path: &str, seg: &str) -> String {
    if path.is_empty() {
        seg.to_string()
    } else {
        format!("{path}.{seg}")
    }
}

fn check(schema: &Value, value: &Value, path: String, out: &mut Vec<SchemaViolation>) {
    let Some(schema) = schema.as_object() else {
        return;
    };

    if let Some(ty) = schema.get("type") {
        let ok = match ty {
            Value::String(t) => type_matches(t, value),
            Value::Array(ts) => ts.iter().filter_map(Value::as_str).any(|t| type_matches(t, value)),
            _ => true,
        };
        if !ok {
            out.push(SchemaViolation {
                path,
                message: format!("expected type {ty}, got {}", kind_of(value)),
            });
            return;
        }
    }

    if let Some(Value::Array(allowed)) = schema.get("enum") {
        if !allowed.contains(value) {
            out.push(SchemaViolation {
                path: path.clone(),
                message: format!("value {value} not in enum"),
            });
        }
    }

    if let Some(n) = value.as_f64() {
        if let Some(min) = schema.get("minimum").and_then(Value::as_f64) {
            if n < min {
                out.push(SchemaViolation {
                    path: path.clone(),
                    message: format!("{n} is below minimum {min}"),
                });
            }
        }
        if let Some(max) = schema.get("maximum").and_then(Value::as_f64) {
            if n > max {
                out.push(SchemaViolation {
                    path: path.clone(),
                    message: format!("{n} exceeds maximum {max}"),
                });
            }
        }
    }

    if let Value::Object(obj) = value {
        let props = schema.get("properties").and_then(Value::as_object);
        if let Some(Value::Array(required)) = schema.get("required") {
            for name in required.iter().filter_map(Value::as_str) {
                if !obj.contains_key(name) {
                    out.push(SchemaViolation {
                        path: join(&path, name),
                        message: "missing required field".into(),
                    });
                }
            }
        }
        if let Some(props) = props {
            for (name, sub) in props {
                if let Some(v) = obj.get(name) {
                    check(sub, v, join(&path, name), out);
                }
            }
        }
        if schema.get("additionalProperties") == Some(&Value::Bool(false)) {
            for name in obj.keys() {
                if !props.is_some_and(|p| p.contains_key(name)) {
                    out.push(SchemaViolation {
                        path: join(&path, name),
                        message: "unexpected field".into(),
                    });
                }
            }
        }
    }

    if let Value::Array(items) = value {
        if let Some(min) = schema.get("minItems").and_then(Value::as_u64) {
            if (items.len() as u64) < min {
                out.push(SchemaViolation {
                    path: path.clone(),
                    message: format!("expected at least {min} items"),
                });
            }
        }
        if let Some(item_schema) = schema.get("items") {
            for (i, item) in items.iter().enumerate() {
                check(item_schema, item, join(&path, &i.to_string()), out);
            }
        }
    }
}

fn kind_of(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(n) if n.is_i64() || n.is_u64() => "integer",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}
