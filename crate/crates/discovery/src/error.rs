use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiscoveryError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("corpus parse error at line {line}: {message}")]
    CorpusParse { line: usize, message: String },
    #[error("duplicate tool_id {tool_id} at line {line}")]
    DuplicateToolId { tool_id: String, line: usize },
    #[error("benchmark parse error at line {line}: {message}")]
    BenchmarkParse { line: usize, message: String },
    #[error("text is empty after normalization")]
    EmptyText,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("query is empty")]
    EmptyQuery,
    #[error("k must be at least 1, got {0}")]
    InvalidK(i64),
    #[error("case {case} names unknown ground-truth tool {tool_id}")]
    UnknownGroundTruth { case: usize, tool_id: String },
    #[error("unknown documentation strategy {0:?}")]
    UnknownStrategy(String),
}

impl DiscoveryError {
    pub fn class(&self) -> &'static str {
        match self {
            DiscoveryError::Io { .. } => "IO",
            DiscoveryError::CorpusParse { .. } => "CORPUS_PARSE",
            DiscoveryError::DuplicateToolId { .. } => "DUPLICATE_TOOL_ID",
            DiscoveryError::BenchmarkParse { .. } => "BENCHMARK_PARSE",
            DiscoveryError::EmptyText => "EMPTY_TEXT",
            DiscoveryError::EmptyCorpus => "EMPTY_CORPUS",
            DiscoveryError::EmptyQuery => "EMPTY_QUERY",
            DiscoveryError::InvalidK(_) => "INVALID_K",
            DiscoveryError::UnknownGroundTruth { .. } => "UNKNOWN_GROUND_TRUTH",
            DiscoveryError::UnknownStrategy(_) => "UNKNOWN_STRATEGY",
        }
    }
}

impl From<DiscoveryError> for scimcp_core::ToolFailure {
    fn from(e: DiscoveryError) -> Self {
        scimcp_core::ToolFailure::new(e.to_string()).with("error_class", e.class())
    }
}
