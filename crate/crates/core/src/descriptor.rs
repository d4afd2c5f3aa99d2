//! Descriptors for the three MCP primitives and the server identity.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DescriptorError {
    #[error("invalid tool name {0:?}: must match [a-z0-9_]+")]
    InvalidName(String),
    #[error("tool {tool}: required parameter {param:?} is not declared in input_schema.properties")]
    UndeclaredRequired { tool: String, param: String },
    #[error("invalid requirement token {0:?}: must be a non-empty lowercase token")]
    InvalidRequirement(String),
    #[error("invalid scope {0:?}: expected <service>:<action>")]
    InvalidScope(String),
    #[error("resource uri {0:?} has no scheme prefix")]
    MissingScheme(String),
    #[error("prompt {prompt}: required parameter {param:?} does not appear in the template")]
    UnusedRequiredParam { prompt: String, param: String },
    #[error("prompt {prompt}: placeholder {{{placeholder}}} is not a declared parameter")]
    UndeclaredPlaceholder { prompt: String, placeholder: String },
    #[error("prompt {prompt}: unterminated placeholder")]
    UnterminatedPlaceholder { prompt: String },
}

pub fn is_valid_tool_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

/// Lowercase token: letters, digits, and `-_.+` only.
pub fn is_valid_token(token: &str) -> bool {
    !token.is_empty()
        && token
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || matches!(b, b'-' | b'_' | b'.' | b'+'))
}

/// Software packages and resource tags a capability needs from a site.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementSet {
    #[serde(default)]
    pub software: BTreeSet<String>,
    #[serde(default)]
    pub resources: BTreeSet<String>,
}

impl RequirementSet {
    pub fn new<S, R>(software: S, resources: R) -> Self
    where
        S: IntoIterator,
        S::Item: Into<String>,
        R: IntoIterator,
        R::Item: Into<String>,
    {
        Self {
            software: software.into_iter().map(Into::into).collect(),
            resources: resources.into_iter().map(Into::into).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.software.is_empty() && self.resources.is_empty()
    }

    pub fn validate(&self) -> Result<(), DescriptorError> {
        for token in self.software.iter().chain(&self.resources) {
            if !is_valid_token(token) {
                return Err(DescriptorError::InvalidRequirement(token.clone()));
            }
        }
        Ok(())
    }
}

/// How to follow an asynchronous task started by a tool.
///
/// When set, a successful call returns `{"task_id": ..}`; the status tool is
/// polled with the same `task_id` until the task reaches a terminal state, and
/// the result tool (if any) is fetched afterwards.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskPolling {
    pub status_tool: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_tool: Option<String>,
}

/// An invokable capability: interface, description and requirements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ToolDescriptor {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default = "empty_object_schema", alias = "input_schema")]
    pub input_schema: Value,
    #[serde(default = "any_schema", alias = "output_schema")]
    pub output_schema: Value,
    #[serde(default, skip_serializing_if = "RequirementSet::is_empty")]
    pub requirements: RequirementSet,
    /// Scope a caller's grant must hold, as `<service>:<action>`.
    #[serde(default, skip_serializing_if = "Option::is_none", alias = "required_scope")]
    pub required_scope: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polling: Option<TaskPolling>,
}

fn empty_object_schema() -> Value {
    json!({"type": "object", "properties": {}})
}

fn any_schema() -> Value {
    json!({})
}

impl ToolDescriptor {
    pub fn new(name: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            input_schema: empty_object_schema(),
            output_schema: any_schema(),
            requirements: RequirementSet::default(),
            required_scope: None,
            polling: None,
        }
    }

    pub fn with_input_schema(mut self, schema: Value) -> Self {
        self.input_schema = schema;
        self
    }

    pub fn with_output_schema(mut self, schema: Value) -> Self {
        self.output_schema = schema;
        self
    }

    pub fn with_requirements(mut self, requirements: RequirementSet) -> Self {
        self.requirements = requirements;
        self
    }

    pub fn with_scope(mut self, scope: impl Into<String>) -> Self {
        self.required_scope = Some(scope.into());
        self
    }

    pub fn with_polling(mut self, polling: TaskPolling) -> Self {
        self.polling = Some(polling);
        self
    }

    /// Names listed in `input_schema.required`.
    pub fn required_params(&self) -> Vec<&str> {
        self.input_schema
            .get("required")
            .and_then(Value::as_array)
            .map(|arr| arr.iter().filter_map(Value::as_str).collect())
            .unwrap_or_default()
    }

    pub fn declares_param(&self, param: &str) -> bool {
        self.input_schema
            .get("properties")
            .and_then(Value::as_object)
            .is_some_and(|props| props.contains_key(param))
    }

    pub fn validate(&self) -> Result<(), DescriptorError> {
        if !is_valid_tool_name(&self.name) {
            return Err(DescriptorError::InvalidName(self.name.clone()));
        }
        for param in self.required_params() {
            if !self.declares_param(param) {
                return Err(DescriptorError::UndeclaredRequired {
                    tool: self.name.clone(),
                    param: param.to_string(),
                });
            }
        }
        self.requirements.validate()?;
        if let Some(scope) = &self.required_scope {
            if !is_valid_scope(scope) {
                return Err(DescriptorError::InvalidScope(scope.clone()));
            }
        }
        Ok(())
    }
}

/// `<service>:<action>` with both halves valid lowercase tokens.
pub fn is_valid_scope(scope: &str) -> bool {
    match scope.split_once(':') {
        Some((service, action)) => is_valid_token(service) && is_valid_token(action),
        None => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResourceDescriptor {
    pub uri: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(rename = "mimeType", alias = "media_type")]
    pub media_type: String,
}

impl ResourceDescriptor {
    pub fn validate(&self) -> Result<(), DescriptorError> {
        match self.uri.split_once("://") {
            Some((scheme, _)) if !scheme.is_empty() => Ok(()),
            _ => Err(DescriptorError::MissingScheme(self.uri.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptArgument {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub required: bool,
}

/// Reusable prompt template with `{name}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptDescriptor {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub arguments: Vec<PromptArgument>,
    #[serde(skip)]
    pub template: String,
}

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn split_template(template: &str) -> Option<Vec<Piece<'_>>> {
    let mut pieces = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            pieces.push(Piece::Text(&rest[..open]));
        }
        let after = &rest[open + 1..];
        let close = after.find('}')?;
        pieces.push(Piece::Slot(&after[..close]));
        rest = &after[close + 1..];
    }
    if !rest.is_empty() {
        pieces.push(Piece::Text(rest));
    }
    Some(pieces)
}

impl PromptDescriptor {
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        arguments: Vec<PromptArgument>,
        template: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            arguments,
            template: template.into(),
        }
    }

    pub fn placeholders(&self) -> Option<BTreeSet<&str>> {
        split_template(&self.template).map(|pieces| {
            pieces
                .into_iter()
                .filter_map(|p| match p {
                    Piece::Slot(s) => Some(s),
                    Piece::Text(_) => None,
                })
                .collect()
        })
    }

    pub fn validate(&self) -> Result<(), DescriptorError> {
        let slots = self
            .placeholders()
            .ok_or_else(|| DescriptorError::UnterminatedPlaceholder {
                prompt: self.name.clone(),
            })?;
        for arg in self.arguments.iter().filter(|a| a.required) {
            if !slots.contains(arg.name.as_str()) {
                return Err(DescriptorError::UnusedRequiredParam {
                    prompt: self.name.clone(),
                    param: arg.name.clone(),
                });
            }
        }
        for slot in slots {
            if !self.arguments.iter().any(|a| a.name == slot) {
                return Err(DescriptorError::UndeclaredPlaceholder {
                    prompt: self.name.clone(),
                    placeholder: slot.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Substitute every placeholder. Returns the first missing required
    /// parameter on failure; absent optional parameters render as "".
    pub fn render(&self, params: &BTreeMap<String, String>) -> Result<String, String> {
        for arg in self.arguments.iter().filter(|a| a.required) {
            if !params.contains_key(&arg.name) {
                return Err(arg.name.clone());
            }
        }
        let pieces = split_template(&self.template).unwrap_or_default();
        let mut out = String::with_capacity(self.template.len());
        for piece in pieces {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(s) => out.push_str(params.get(s).map(String::as_str).unwrap_or("")),
            }
        }
        Ok(out)
    }
}

/// An execution environment: installed software and available resources.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteSpec {
    pub site_id: String,
    #[serde(default)]
    pub software: BTreeSet<String>,
    #[serde(default)]
    pub resources: BTreeSet<String>,
}

impl SiteSpec {
    pub fn new<S, R>(site_id: impl Into<String>, software: S, resources: R) -> Self
    where
        S: IntoIterator,
        S::Item: Into<String>,
        R: IntoIterator,
        R::Item: Into<String>,
    {
        Self {
            site_id: site_id.into(),
            software: software.into_iter().map(Into::into).collect(),
            resources: resources.into_iter().map(Into::into).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), DescriptorError> {
        for token in self.software.iter().chain(&self.resources) {
            if !is_valid_token(token) {
                return Err(DescriptorError::InvalidRequirement(token.clone()));
            }
        }
        Ok(())
    }

    /// Requirement symbols this site lacks, as (missing software, missing resources).
    pub fn missing(&self, req: &RequirementSet) -> (Vec<String>, Vec<String>) {
        (
            req.software.difference(&self.software).cloned().collect(),
            req.resources.difference(&self.resources).cloned().collect(),
        )
    }

    pub fn satisfies(&self, req: &RequirementSet) -> bool {
        req.software.is_subset(&self.software) && req.resources.is_subset(&self.resources)
    }
}

/// Who a server is and which capabilities it currently exposes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerIdentity {
    pub server_id: String,
    pub capability_names: Vec<String>,
    pub auth_client_id: String,
}
