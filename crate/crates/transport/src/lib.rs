//! Transports for [`scimcp_core::McpServer`].
//!
//! * [`stdio`]: one implicit session, one envelope per LF-terminated line.
//! * [`http`]: a single `/mcp` endpoint. POST carries client envelopes, GET
//!   opens a server-sent event stream of the session's notifications, and
//!   DELETE closes the session. Sessions are named by the `Mcp-Session-Id`
//!   header, assigned in the initialize response.
//! * [`client`]: a matching HTTP client.

pub mod client;
pub mod config;
pub mod http;
pub mod stdio;

pub use client::{ClientError, EventStream, HttpClient, SseEvent};
pub use config::{ConfigError, TransportConfig};
pub use http::{router, serve_http, HttpServer};
pub use stdio::{serve_lines, serve_stdio};

/// Endpoint path of the HTTP transport.
pub const MCP_PATH: &str = "/mcp";

/// Header carrying the session id on every request after initialize.
pub const SESSION_HEADER: &str = "mcp-session-id";

/// Header a reconnecting event-stream client sends to resume.
pub const LAST_EVENT_ID_HEADER: &str = "last-event-id";

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("cannot bind {addr}: {source}")]
    BindFailed {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("stream i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Session(#[from] scimcp_core::SessionError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}
