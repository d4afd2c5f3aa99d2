use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fmt;

/// Error taxonomy shared by every server in the deployment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCode {
    ParseError,
    InvalidRequest,
    MethodNotFound,
    InvalidArgs,
    InternalError,
    UnknownTool,
    UnknownResource,
    UnknownPrompt,
    MissingParam,
    NotInitialized,
    AlreadyInitialized,
    InvalidCursor,
    AuthDenied,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 13] = [
        ErrorCode::ParseError,
        ErrorCode::InvalidRequest,
        ErrorCode::MethodNotFound,
        ErrorCode::InvalidArgs,
        ErrorCode::InternalError,
        ErrorCode::UnknownTool,
        ErrorCode::UnknownResource,
        ErrorCode::UnknownPrompt,
        ErrorCode::MissingParam,
        ErrorCode::NotInitialized,
        ErrorCode::AlreadyInitialized,
        ErrorCode::InvalidCursor,
        ErrorCode::AuthDenied,
    ];

    pub fn code(self) -> i64 {
        match self {
            ErrorCode::ParseError => -32700,
            ErrorCode::InvalidRequest => -32600,
            ErrorCode::MethodNotFound => -32601,
            ErrorCode::InvalidArgs => -32602,
            ErrorCode::InternalError => -32603,
            ErrorCode::UnknownTool => 1001,
            ErrorCode::UnknownResource => 1002,
            ErrorCode::UnknownPrompt => 1003,
            ErrorCode::MissingParam => 1004,
            ErrorCode::NotInitialized => 1005,
            ErrorCode::AlreadyInitialized => 1006,
            ErrorCode::InvalidCursor => 1007,
            ErrorCode::AuthDenied => 1008,
        }
    }

    pub fn from_code(code: i64) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorCode::ParseError => "PARSE_ERROR",
            ErrorCode::InvalidRequest => "INVALID_REQUEST",
            ErrorCode::MethodNotFound => "UNKNOWN_METHOD",
            ErrorCode::InvalidArgs => "INVALID_ARGS",
            ErrorCode::InternalError => "INTERNAL_ERROR",
            ErrorCode::UnknownTool => "UNKNOWN_TOOL",
            ErrorCode::UnknownResource => "UNKNOWN_RESOURCE",
            ErrorCode::UnknownPrompt => "UNKNOWN_PROMPT",
            ErrorCode::MissingParam => "MISSING_PARAM",
            ErrorCode::NotInitialized => "NOT_INITIALIZED",
            ErrorCode::AlreadyInitialized => "ALREADY_INITIALIZED",
            ErrorCode::InvalidCursor => "INVALID_CURSOR",
            ErrorCode::AuthDenied => "AUTH_DENIED",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// JSON-RPC error object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorObject {
    pub code: i64,
    pub message: String,
    /// A present `null` stays `Some(Null)` so decoding inverts encoding.
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "present")]
    pub data: Option<Value>,
}

fn present<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Value>, D::Error> {
    Value::deserialize(d).map(Some)
}

impl ErrorObject {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        let mut message = message.into();
        if message.is_empty() {
            message = code.name().to_string();
        }
        Self {
            code: code.code(),
            message,
            data: None,
        }
    }

    pub fn with_data(mut self, data: Value) -> Self {
        self.data = Some(data);
        self
    }

    /// The taxonomy entry for this code, if it is one we define.
    pub fn kind(&self) -> Option<ErrorCode> {
        ErrorCode::from_code(self.code)
    }

    pub fn is(&self, code: ErrorCode) -> bool {
        self.code == code.code()
    }

    pub fn parse_error(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::ParseError, message)
    }

    pub fn invalid_request(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::InvalidRequest, message)
    }
}

impl fmt::Display for ErrorObject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            Some(kind) => write!(f, "{kind} ({}): {}", self.code, self.message),
            None => write!(f, "error {}: {}", self.code, self.message),
        }
    }
}

impl std::error::Error for ErrorObject {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_distinct_and_invertible() {
        let mut seen = std::collections::HashSet::new();
        for code in ErrorCode::ALL {
            assert!(seen.insert(code.code()));
            assert_eq!(ErrorCode::from_code(code.code()), Some(code));
        }
        assert_eq!(ErrorCode::AuthDenied.code(), 1008);
        assert_eq!(ErrorCode::ParseError.code(), -32700);
    }

    #[test]
    fn empty_message_falls_back_to_code_name() {
        let err = ErrorObject::new(ErrorCode::UnknownTool, "");
        assert_eq!(err.message, "UNKNOWN_TOOL");
    }
}
