//! Newline-delimited transport over a byte stream pair.

use scimcp_core::{encode_message, McpServer, TransportKind};
use std::sync::Arc;
use tokio::io::{AsyncBufRead, AsyncBufReadExt, AsyncWrite, AsyncWriteExt, BufReader};

use crate::TransportError;

/// Serve one session until `reader` reaches EOF.
///
/// Requests are answered strictly in arrival order. Notifications queued on
/// the session are written as soon as they exist, between responses.
pub async fn serve_lines<R, W>(server: &Arc<McpServer>, mut reader: R, mut writer: W) -> Result<(), TransportError>
where
    R: AsyncBufRead + Unpin,
    W: AsyncWrite + Unpin,
{
    let session = server.open_session(TransportKind::Stdio)?;
    let mut seen = 0u64;
    let mut buf = Vec::new();
    let result: Result<(), TransportError> = async {
        loop {
            tokio::select! {
                biased;
                events = session.wait_events_after(seen) => {
                    for (id, envelope) in events {
                        writer.write_all(encode_message(&envelope).as_bytes()).await?;
                        writer.write_all(b"\n").await?;
                        seen = id;
                    }
                    writer.flush().await?;
                }
                // read_until appends to `buf`, so a cancelled read loses nothing.
                n = reader.read_until(b'\n', &mut buf) => {
                    if n? == 0 && buf.is_empty() {
                        return Ok(());
                    }
                    let line = String::from_utf8_lossy(&buf).trim_end_matches(['\n', '\r']).to_string();
                    buf.clear();
                    if line.trim().is_empty() {
                        continue;
                    }
                    if let Some(reply) = server.handle_text(session.id(), &line)? {
                        writer.write_all(reply.as_bytes()).await?;
                        writer.write_all(b"\n").await?;
                        writer.flush().await?;
                    }
                }
            }
        }
    }
    .await;
    // Flush whatever the last request queued, then close.
    for (_, envelope) in session.events_after(seen) {
        writer.write_all(encode_message(&envelope).as_bytes()).await?;
        writer.write_all(b"\n").await?;
    }
    writer.flush().await?;
    let _ = server.close_session(session.id());
    result
}

pub async fn serve_stdio(server: Arc<McpServer>) -> Result<(), TransportError> {
    serve_lines(&server, BufReader::new(tokio::io::stdin()), tokio::io::stdout()).await
}
