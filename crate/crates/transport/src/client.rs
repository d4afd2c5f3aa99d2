//! Client side of the HTTP transport.

use futures::StreamExt;
use reqwest::StatusCode;
use scimcp_core::{decode_message, encode_message, ErrorObject, RpcEnvelope, ToolDescriptor, ToolResult};
use serde_json::{json, Value};
use std::pin::Pin;
use std::sync::atomic::{AtomicI64, Ordering};
use std::time::Duration;

use crate::{LAST_EVENT_ID_HEADER, MCP_PATH, SESSION_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("http: {0}")]
    Http(#[from] reqwest::Error),
    #[error("server answered {status}: {body}")]
    Status { status: u16, body: String },
    #[error("rpc error {}: {}", .0.code, .0.message)]
    Rpc(ErrorObject),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("timed out waiting for an event")]
    Timeout,
}

/// Raw reply to a POST, for callers that inspect status codes directly.
#[derive(Debug, Clone)]
pub struct RawReply {
    pub status: u16,
    pub session_id: Option<String>,
    pub body: String,
}

/// One initialized session on a remote server.
pub struct HttpClient {
    http: reqwest::Client,
    url: String,
    session_id: String,
    next_id: AtomicI64,
    init: Value,
}

/// `base` may be `http://host:port` or the full endpoint URL.
fn endpoint(base: &str) -> String {
    let base = base.trim_end_matches('/');
    if base.ends_with(MCP_PATH) {
        base.to_string()
    } else {
        format!("{base}{MCP_PATH}")
    }
}

pub async fn post_raw(
    http: &reqwest::Client,
    url: &str,
    session: Option<&str>,
    body: String,
) -> Result<RawReply, ClientError> {
    let mut req = http
        .post(url)
        .header(reqwest::header::CONTENT_TYPE, "application/json")
        .header(reqwest::header::ACCEPT, "application/json, text/event-stream")
        .body(body);
    if let Some(id) = session {
        req = req.header(SESSION_HEADER, id);
    }
    let resp = req.send().await?;
    let status = resp.status().as_u16();
    let session_id = resp
        .headers()
        .get(SESSION_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);
    Ok(RawReply {
        status,
        session_id,
        body: resp.text().await?,
    })
}

fn outcome(reply: RawReply) -> Result<Value, ClientError> {
    if reply.status != StatusCode::OK.as_u16() {
        return Err(ClientError::Status {
            status: reply.status,
            body: reply.body,
        });
    }
    match decode_message(&reply.body).map_err(ClientError::Rpc)? {
        RpcEnvelope::Response { outcome, .. } => outcome.map_err(ClientError::Rpc),
        other => Err(ClientError::Protocol(format!("expected a response, got {other:?}"))),
    }
}

impl HttpClient {
    pub async fn connect(base: &str) -> Result<Self, ClientError> {
        Self::connect_with(reqwest::Client::new(), base).await
    }

    pub async fn connect_with(http: reqwest::Client, base: &str) -> Result<Self, ClientError> {
        let url = endpoint(base);
        let init = RpcEnvelope::request(
            0,
            "initialize",
            json!({
                "protocolVersion": scimcp_core::PROTOCOL_VERSION,
                "clientInfo": {"name": "scimcp-http", "version": env!("CARGO_PKG_VERSION")},
                "capabilities": {}
            }),
        );
        let reply = post_raw(&http, &url, None, encode_message(&init)).await?;
        if reply.status != StatusCode::OK.as_u16() {
            return Err(ClientError::Status {
                status: reply.status,
                body: reply.body,
            });
        }
        let session_id = reply
            .session_id
            .clone()
            .ok_or_else(|| ClientError::Protocol("initialize response carried no session id".into()))?;
        let init = outcome(reply)?;
        let client = Self {
            http,
            url,
            session_id,
            next_id: AtomicI64::new(1),
            init,
        };
        client.notify("notifications/initialized", Value::Null).await?;
        Ok(client)
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// Result of the initialize handshake.
    pub fn server_info(&self) -> &Value {
        &self.init
    }

    pub async fn request(&self, method: &str, params: Value) -> Result<Value, ClientError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let body = encode_message(&RpcEnvelope::request(id, method, params));
        outcome(post_raw(&self.http, &self.url, Some(&self.session_id), body).await?)
    }

    pub async fn notify(&self, method: &str, params: Value) -> Result<(), ClientError> {
        let body = encode_message(&RpcEnvelope::notification(method, params));
        let reply = post_raw(&self.http, &self.url, Some(&self.session_id), body).await?;
        match reply.status {
            200 | 202 => Ok(()),
            status => Err(ClientError::Status {
                status,
                body: reply.body,
            }),
        }
    }

    pub async fn list_tools(&self) -> Result<Vec<ToolDescriptor>, ClientError> {
        let mut tools = Vec::new();
        let mut cursor: Option<String> = None;
        loop {
            let params = match &cursor {
                Some(c) => json!({"cursor": c}),
                None => json!({}),
            };
            let page = self.request("tools/list", params).await?;
            let batch: Vec<ToolDescriptor> = serde_json::from_value(page["tools"].clone())
                .map_err(|e| ClientError::Protocol(format!("malformed tools/list page: {e}")))?;
            tools.extend(batch);
            match page.get("nextCursor").and_then(Value::as_str) {
                Some(next) => cursor = Some(next.to_string()),
                None => return Ok(tools),
            }
        }
    }

    pub async fn call_tool(&self, name: &str, args: Value, grant: Option<&str>) -> Result<ToolResult, ClientError> {
        let mut params = json!({"name": name, "arguments": args});
        if let Some(token) = grant {
            params["_meta"] = json!({"authorization": token});
        }
        let raw = self.request("tools/call", params).await?;
        ToolResult::from_value(&raw).ok_or_else(|| ClientError::Protocol("malformed tool result".into()))
    }

    /// Open the session's event stream, resuming after `last_event_id`.
    pub async fn events(&self, last_event_id: Option<u64>) -> Result<EventStream, ClientError> {
        let mut req = self
            .http
            .get(&self.url)
            .header(reqwest::header::ACCEPT, "text/event-stream")
            .header(SESSION_HEADER, &self.session_id);
        if let Some(id) = last_event_id {
            req = req.header(LAST_EVENT_ID_HEADER, id.to_string());
        }
        let resp = req.send().await?;
        if resp.status() != StatusCode::OK {
            return Err(ClientError::Status {
                status: resp.status().as_u16(),
                body: resp.text().await.unwrap_or_default(),
            });
        }
        Ok(EventStream {
            body: Box::pin(resp.bytes_stream()),
            buf: String::new(),
        })
    }

    /// DELETE the session.
    pub async fn close(self) -> Result<(), ClientError> {
        let resp = self
            .http
            .delete(&self.url)
            .header(SESSION_HEADER, &self.session_id)
            .send()
            .await?;
        match resp.status() {
            StatusCode::NO_CONTENT | StatusCode::OK => Ok(()),
            s => Err(ClientError::Status {
                status: s.as_u16(),
                body: resp.text().await.unwrap_or_default(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SseEvent {
    pub id: Option<u64>,
    pub envelope: RpcEnvelope,
}

type ByteStream = Pin<Box<dyn futures::Stream<Item = reqwest::Result<bytes::Bytes>> + Send>>;

pub struct EventStream {
    body: ByteStream,
    buf: String,
}

impl EventStream {
    /// Next event carrying data. `None` once the server ends the stream.
    pub async fn next(&mut self) -> Result<Option<SseEvent>, ClientError> {
        loop {
            while let Some(end) = self.buf.find("\n\n") {
                let block: String = self.buf.drain(..end + 2).collect();
                if let Some(ev) = parse_block(&block)? {
                    return Ok(Some(ev));
                }
            }
            match self.body.next().await {
                Some(chunk) => self
                    .buf
                    .push_str(&String::from_utf8_lossy(&chunk?).replace("\r\n", "\n")),
                None => return Ok(None),
            }
        }
    }

    pub async fn next_within(&mut self, limit: Duration) -> Result<Option<SseEvent>, ClientError> {
        tokio::time::timeout(limit, self.next())
            .await
            .map_err(|_| ClientError::Timeout)?
    }
}

/// One SSE block. Comment-only blocks (keep-alives) yield `None`.
fn parse_block(block: &str) -> Result<Option<SseEvent>, ClientError> {
    let mut id = None;
    let mut data: Vec<&str> = Vec::new();
    for line in block.lines() {
        if line.starts_with(':') {
            continue;
        }
        let (field, value) = line.split_once(':').unwrap_or((line, ""));
        let value = value.strip_prefix(' ').unwrap_or(value);
        match field {
            "id" => id = value.parse().ok(),
            "data" => data.push(value),
            _ => {}
        }
    }
    if data.is_empty() {
        return Ok(None);
    }
    let envelope = decode_message(&data.join("\n")).map_err(ClientError::Rpc)?;
    Ok(Some(SseEvent { id, envelope }))
}
