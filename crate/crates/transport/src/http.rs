//! Streamable-HTTP transport.

use axum::body::{to_bytes, Body};
use axum::extract::State;
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use scimcp_core::{
    decode_message, encode_message, ErrorCode, ErrorObject, McpServer, RpcEnvelope, SessionError, SessionHandle,
    TransportKind,
};
use std::collections::VecDeque;
use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::config::TransportConfig;
use crate::{TransportError, LAST_EVENT_ID_HEADER, MCP_PATH, SESSION_HEADER};

/// Largest accepted request body.
const MAX_BODY_BYTES: usize = 16 * 1024 * 1024;

#[derive(Clone)]
struct AppState {
    server: Arc<McpServer>,
    read_timeout: Duration,
}

/// Router exposing `server` at [`MCP_PATH`]. Applies the config's session
/// limit to the server.
pub fn router(server: Arc<McpServer>, config: &TransportConfig) -> Router {
    server.set_session_limit(config.max_sessions);
    let state = AppState {
        server,
        read_timeout: config.read_timeout(),
    };
    Router::new()
        .route(MCP_PATH, get(open_stream).post(post_message).delete(close))
        .with_state(state)
}

/// A running listener.
pub struct HttpServer {
    addr: SocketAddr,
    server_id: String,
    stop: Option<oneshot::Sender<()>>,
    task: Option<JoinHandle<std::io::Result<()>>>,
}

impl HttpServer {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn server_id(&self) -> &str {
        &self.server_id
    }

    pub fn url(&self) -> String {
        format!("http://{}{MCP_PATH}", self.addr)
    }

    /// Stop accepting connections. Open event streams are cut after a short
    /// grace period.
    pub async fn shutdown(mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(task) = self.task.take() {
            let abort = task.abort_handle();
            if tokio::time::timeout(Duration::from_secs(1), task).await.is_err() {
                abort.abort();
            }
        }
    }

    /// Run until the listener fails.
    pub async fn wait(mut self) -> std::io::Result<()> {
        match self.task.take() {
            Some(task) => task.await.unwrap_or(Ok(())),
            None => Ok(()),
        }
    }
}

impl Drop for HttpServer {
    fn drop(&mut self) {
        if let Some(task) = &self.task {
            task.abort();
        }
    }
}

pub async fn serve_http(server: Arc<McpServer>, config: &TransportConfig) -> Result<HttpServer, TransportError> {
    config.validate()?;
    let listener = tokio::net::TcpListener::bind(&config.bind_address)
        .await
        .map_err(|source| TransportError::BindFailed {
            addr: config.bind_address.clone(),
            source,
        })?;
    let addr = listener.local_addr()?;
    let server_id = server.server_id().to_string();
    let app = router(server, config);
    let (stop, stopped) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stopped.await;
            })
            .await
    });
    Ok(HttpServer {
        addr,
        server_id,
        stop: Some(stop),
        task: Some(task),
    })
}

fn session_header(headers: &HeaderMap) -> Option<String> {
    headers
        .get(SESSION_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string)
}

fn json_response(status: StatusCode, body: String, session: Option<&str>) -> Response {
    let mut resp = (status, [(header::CONTENT_TYPE, "application/json")], body).into_response();
    if let Some(id) = session.and_then(|s| HeaderValue::from_str(s).ok()) {
        resp.headers_mut().insert(SESSION_HEADER, id);
    }
    resp
}

fn rpc_error(
    status: StatusCode,
    id: Option<scimcp_core::RequestId>,
    code: ErrorCode,
    message: impl Into<String>,
) -> Response {
    let env = RpcEnvelope::error(id, ErrorObject::new(code, message));
    json_response(status, encode_message(&env), None)
}

fn session_failure(e: SessionError) -> Response {
    let status = match e {
        SessionError::SessionLimit(_) => StatusCode::SERVICE_UNAVAILABLE,
        SessionError::UnknownSession(_) | SessionError::Closed(_) => StatusCode::NOT_FOUND,
    };
    (status, e.to_string()).into_response()
}

async fn post_message(State(st): State<AppState>, headers: HeaderMap, body: Body) -> Response {
    let bytes = match tokio::time::timeout(st.read_timeout, to_bytes(body, MAX_BODY_BYTES)).await {
        Err(_) => return (StatusCode::REQUEST_TIMEOUT, "request body not received in time").into_response(),
        Ok(Err(e)) => return (StatusCode::BAD_REQUEST, e.to_string()).into_response(),
        Ok(Ok(b)) => b,
    };
    let text = String::from_utf8_lossy(&bytes);

    if let Some(id) = session_header(&headers) {
        let session = match st.server.session(&id) {
            Ok(s) => s,
            Err(e) => return session_failure(e),
        };
        let _order = session.dispatch_guard().await;
        return match st.server.handle_text(&id, &text) {
            Ok(Some(reply)) => json_response(StatusCode::OK, reply, None),
            Ok(None) => StatusCode::ACCEPTED.into_response(),
            Err(e) => session_failure(e),
        };
    }

    // Without a session only initialize is meaningful.
    let envelope = match decode_message(&text) {
        Ok(e) => e,
        Err(err) => {
            return json_response(
                StatusCode::BAD_REQUEST,
                encode_message(&RpcEnvelope::error(None, err)),
                None,
            )
        }
    };
    if envelope.method() != Some("initialize") || envelope.is_notification() {
        return rpc_error(
            StatusCode::BAD_REQUEST,
            envelope.id().cloned(),
            ErrorCode::InvalidRequest,
            "missing Mcp-Session-Id header; send initialize first",
        );
    }
    let session = match st.server.open_session(TransportKind::Http) {
        Ok(s) => s,
        Err(e) => return session_failure(e),
    };
    let _order = session.dispatch_guard().await;
    match st.server.handle_on(&session, envelope) {
        Ok(Some(reply)) => json_response(StatusCode::OK, encode_message(&reply), Some(session.id())),
        Ok(None) | Err(_) => {
            let _ = st.server.close_session(session.id());
            StatusCode::INTERNAL_SERVER_ERROR.into_response()
        }
    }
}

fn accepts_event_stream(headers: &HeaderMap) -> bool {
    match headers.get(header::ACCEPT).and_then(|v| v.to_str().ok()) {
        None => true,
        Some(a) => a.contains("text/event-stream") || a.contains("*/*"),
    }
}

async fn open_stream(State(st): State<AppState>, headers: HeaderMap) -> Response {
    if !accepts_event_stream(&headers) {
        return (StatusCode::NOT_ACCEPTABLE, "GET requires Accept: text/event-stream").into_response();
    }
    let Some(id) = session_header(&headers) else {
        return (StatusCode::BAD_REQUEST, "missing Mcp-Session-Id header").into_response();
    };
    let session = match st.server.session(&id) {
        Ok(s) => s,
        Err(e) => return session_failure(e),
    };
    let after = headers
        .get(LAST_EVENT_ID_HEADER)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok())
        .unwrap_or(0);
    Sse::new(event_stream(session, after))
        .keep_alive(KeepAlive::new().interval(Duration::from_secs(15)))
        .into_response()
}

/// Events after `after`, then every new one, ending once the session closes
/// and its queue is drained.
fn event_stream(
    session: Arc<SessionHandle>,
    after: u64,
) -> impl futures::Stream<Item = Result<Event, Infallible>> + Send {
    let state = (session, after, VecDeque::<(u64, RpcEnvelope)>::new());
    futures::stream::unfold(state, |(session, mut after, mut pending)| async move {
        loop {
            if let Some((id, envelope)) = pending.pop_front() {
                after = id;
                let event = Event::default().id(id.to_string()).data(encode_message(&envelope));
                return Some((Ok(event), (session, after, pending)));
            }
            let fresh = session.wait_events_after(after).await;
            if fresh.is_empty() {
                return None;
            }
            pending.extend(fresh);
        }
    })
}

async fn close(State(st): State<AppState>, headers: HeaderMap) -> Response {
    let Some(id) = session_header(&headers) else {
        return (StatusCode::BAD_REQUEST, "missing Mcp-Session-Id header").into_response();
    };
    match st.server.close_session(&id) {
        Ok(()) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => session_failure(e),
    }
}
