//! `${label.path}` references inside task parameters.
//!
//! A string that is exactly one reference is replaced by the referenced JSON
//! value, whatever its type. References embedded in longer strings are
//! interpolated as text.

use serde_json::Value;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reference {
    pub label: String,
    pub path: Vec<String>,
}

/// Split `s` into literal text and references. Unterminated `${` is literal.
fn scan(s: &str) -> Vec<Result<&str, Reference>> {
    let mut parts = Vec::new();
    let mut rest = s;
    while let Some(start) = rest.find("${") {
        let Some(len) = rest[start + 2..].find('}') else { break };
        if start > 0 {
            parts.push(Ok(&rest[..start]));
        }
        let inner = &rest[start + 2..start + 2 + len];
        let mut segs = inner.split('.').map(str::to_string);
        let label = segs.next().unwrap_or_default();
        parts.push(Err(Reference {
            label,
            path: segs.collect(),
        }));
        rest = &rest[start + 3 + len..];
    }
    if !rest.is_empty() {
        parts.push(Ok(rest));
    }
    parts
}

fn walk(value: &Value, out: &mut BTreeSet<String>) {
    match value {
        Value::String(s) => {
            for part in scan(s) {
                if let Err(r) = part {
                    out.insert(r.label);
                }
            }
        }
        Value::Array(items) => items.iter().for_each(|v| walk(v, out)),
        Value::Object(map) => map.values().for_each(|v| walk(v, out)),
        _ => {}
    }
}

/// Every label referenced anywhere inside `value`.
pub fn referenced_labels(value: &Value) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    walk(value, &mut out);
    out
}

fn lookup<'a>(labels: &'a BTreeMap<String, Value>, r: &Reference) -> Result<&'a Value, String> {
    let mut cur = labels
        .get(&r.label)
        .ok_or_else(|| format!("label {} has no value yet", r.label))?;
    for seg in &r.path {
        cur = match cur {
            Value::Object(m) => m.get(seg),
            Value::Array(a) => seg.parse::<usize>().ok().and_then(|i| a.get(i)),
            _ => None,
        }
        .ok_or_else(|| format!("${{{}.{}}} does not resolve", r.label, r.path.join(".")))?;
    }
    Ok(cur)
}

fn text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Replace every reference in `value` using the produced `labels`.
pub fn substitute(value: &Value, labels: &BTreeMap<String, Value>) -> Result<Value, String> {
    Ok(match value {
        Value::String(s) => {
            let parts = scan(s);
            match parts.as_slice() {
                [Err(r)] => lookup(labels, r)?.clone(),
                _ if parts.iter().all(Result::is_ok) => value.clone(),
                _ => {
                    let mut out = String::new();
                    for part in &parts {
                        match part {
                            Ok(lit) => out.push_str(lit),
                            Err(r) => out.push_str(&text(lookup(labels, r)?)),
                        }
                    }
                    Value::String(out)
                }
            }
        }
        Value::Array(items) => Value::Array(items.iter().map(|v| substitute(v, labels)).collect::<Result<_, _>>()?),
        Value::Object(map) => Value::Object(
            map.iter()
                .map(|(k, v)| Ok((k.clone(), substitute(v, labels)?)))
                .collect::<Result<_, String>>()?,
        ),
        other => other.clone(),
    })
}
