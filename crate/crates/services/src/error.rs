use scimcp_core::ToolFailure;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ServiceError {
    #[error("unknown collection {0}")]
    UnknownCollection(String),
    #[error("no such path {path} in collection {collection}")]
    NoSuchPath { collection: String, path: String },
    #[error("invalid path {0:?}: paths must be absolute without '..' segments")]
    InvalidPath(String),
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("unknown endpoint {0}")]
    UnknownEndpoint(String),
    #[error("task {0} has not finished; result not ready")]
    ResultNotReady(String),
    #[error("task {task} failed: {reason}")]
    TaskFailed { task: String, reason: String },
    #[error("unknown task kind {0:?}")]
    UnknownTaskKind(String),
    #[error("task {task:?} is not in the catalog of endpoint {endpoint}")]
    NotInCatalog { endpoint: String, task: String },
    #[error("no endpoint at site {site} offers task {task}")]
    NoEndpointAtSite { site: String, task: String },
    #[error("unknown index {0}")]
    UnknownIndex(String),
    #[error("index {0} already exists")]
    DuplicateIndex(String),
    #[error("unknown system {0}")]
    UnknownSystem(String),
    #[error("unknown topic {0}")]
    UnknownTopic(String),
    #[error("topic {0} already exists")]
    DuplicateTopic(String),
    #[error("cannot truncate topic {topic} to offset {up_to}: log ends at {end}")]
    TruncateBeyondEnd { topic: String, up_to: u64, end: u64 },
    #[error("bad credential for user {0}")]
    BadCredential(String),
    #[error("grant has expired")]
    ExpiredGrant,
    #[error("unknown grant")]
    UnknownGrant,
    #[error("access denied: {0}")]
    AuthDenied(String),
    #[error("invalid scope {0:?}: expected <service>:<read|write|admin>")]
    InvalidScope(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl ServiceError {
    /// Stable machine-readable class carried in tool failure payloads.
    pub fn class(&self) -> &'static str {
        match self {
            ServiceError::UnknownCollection(_) => "UNKNOWN_COLLECTION",
            ServiceError::NoSuchPath { .. } => "NO_SUCH_PATH",
            ServiceError::InvalidPath(_) => "INVALID_PATH",
            ServiceError::UnknownTask(_) => "UNKNOWN_TASK",
            ServiceError::UnknownEndpoint(_) => "UNKNOWN_ENDPOINT",
            ServiceError::ResultNotReady(_) => "RESULT_NOT_READY",
            ServiceError::TaskFailed { .. } => "TASK_FAILED",
            ServiceError::UnknownTaskKind(_) => "UNKNOWN_TASK_KIND",
            ServiceError::NotInCatalog { .. } => "NOT_IN_CATALOG",
            ServiceError::NoEndpointAtSite { .. } => "NO_ENDPOINT_AT_SITE",
            ServiceError::UnknownIndex(_) => "UNKNOWN_INDEX",
            ServiceError::DuplicateIndex(_) => "DUPLICATE_INDEX",
            ServiceError::UnknownSystem(_) => "UNKNOWN_SYSTEM",
            ServiceError::UnknownTopic(_) => "UNKNOWN_TOPIC",
            ServiceError::DuplicateTopic(_) => "DUPLICATE_TOPIC",
            ServiceError::TruncateBeyondEnd { .. } => "TRUNCATE_BEYOND_END",
            ServiceError::BadCredential(_) => "BAD_CREDENTIAL",
            ServiceError::ExpiredGrant => "EXPIRED_GRANT",
            ServiceError::UnknownGrant => "UNKNOWN_GRANT",
            ServiceError::AuthDenied(_) => "AUTH_DENIED",
            ServiceError::InvalidScope(_) => "INVALID_SCOPE",
            ServiceError::InvalidArgument(_) => "INVALID_ARGUMENT",
        }
    }
}

impl From<ServiceError> for ToolFailure {
    fn from(err: ServiceError) -> Self {
        ToolFailure::new(err.to_string()).with("error_class", err.class())
    }
}
