//! Model Context Protocol core: JSON-RPC envelopes, the tool / resource /
//! prompt primitives, and a session-aware server dispatcher.
//!
//! Transports live in `scimcp-transport`; this crate only deals with
//! envelopes and the per-session state machine behind them.

pub mod client;
pub mod descriptor;
pub mod envelope;
pub mod error;
pub mod schema;
pub mod server;
pub mod session;

pub use client::LocalClient;
pub use descriptor::{
    DescriptorError, PromptArgument, PromptDescriptor, RequirementSet, ResourceDescriptor, ServerIdentity, SiteSpec,
    TaskPolling, ToolDescriptor,
};
pub use envelope::{decode_message, encode_message, RequestId, RpcEnvelope};
pub use error::{ErrorCode, ErrorObject};
pub use server::{
    CallContext, GrantVerifier, McpServer, RegistryError, ServerBuilder, ToolFailure, ToolHandler, ToolResult,
};
pub use session::{Lifecycle, SessionError, SessionHandle, TransportKind};

/// The single MCP protocol revision this implementation speaks.
pub const PROTOCOL_VERSION: &str = "2025-06-18";

/// JSON-RPC version string carried on every envelope.
pub const JSONRPC_VERSION: &str = "2.0";

/// Method name of the tool-list change notification.
pub const TOOLS_LIST_CHANGED: &str = "notifications/tools/list_changed";
