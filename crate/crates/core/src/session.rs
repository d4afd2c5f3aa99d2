//! Per-session state: lifecycle flag and the outbound notification queue.
//!
//! Each session owns an ordered outbox of server-initiated envelopes. Every
//! event gets a monotonically increasing id so an event-stream consumer can
//! resume after a reconnect.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex, MutexGuard};
use thiserror::Error;
use tokio::sync::Notify;

use crate::envelope::RpcEnvelope;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    Stdio,
    Http,
    InProcess,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lifecycle {
    Open,
    Initialized,
    Closed,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SessionError {
    #[error("session limit of {0} reached")]
    SessionLimit(usize),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session {0} is closed")]
    Closed(String),
}

/// Events retained per session for resume-from-id.
const RETAINED_EVENTS: usize = 4096;

#[derive(Debug, Default)]
struct Outbox {
    next_event_id: u64,
    events: VecDeque<(u64, RpcEnvelope)>,
}

#[derive(Debug)]
struct SessionInner {
    lifecycle: Lifecycle,
    outbox: Outbox,
}

/// Shared handle to one session.
#[derive(Debug)]
pub struct SessionHandle {
    id: String,
    kind: TransportKind,
    inner: Mutex<SessionInner>,
    wake: Notify,
    /// Serializes request dispatch so responses follow arrival order.
    dispatch: tokio::sync::Mutex<()>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl SessionHandle {
    fn new(id: String, kind: TransportKind) -> Self {
        Self {
            id,
            kind,
            inner: Mutex::new(SessionInner {
                lifecycle: Lifecycle::Open,
                outbox: Outbox {
                    next_event_id: 1,
                    events: VecDeque::new(),
                },
            }),
            wake: Notify::new(),
            dispatch: tokio::sync::Mutex::new(()),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> TransportKind {
        self.kind
    }

    pub fn lifecycle(&self) -> Lifecycle {
        lock(&self.inner).lifecycle
    }

    pub fn is_closed(&self) -> bool {
        self.lifecycle() == Lifecycle::Closed
    }

    pub(crate) fn set_lifecycle(&self, state: Lifecycle) {
        lock(&self.inner).lifecycle = state;
        self.wake.notify_waiters();
    }

    /// Append a server-initiated envelope. Returns its event id, or `None`
    /// when the session is already closed.
    pub fn push(&self, envelope: RpcEnvelope) -> Option<u64> {
        let id = {
            let mut inner = lock(&self.inner);
            if inner.lifecycle == Lifecycle::Closed {
                return None;
            }
            let id = inner.outbox.next_event_id;
            inner.outbox.next_event_id += 1;
            inner.outbox.events.push_back((id, envelope));
            while inner.outbox.events.len() > RETAINED_EVENTS {
                inner.outbox.events.pop_front();
            }
            id
        };
        self.wake.notify_waiters();
        Some(id)
    }

    /// Retained events with id strictly greater than `after`, in order.
    pub fn events_after(&self, after: u64) -> Vec<(u64, RpcEnvelope)> {
        let inner = lock(&self.inner);
        inner
            .outbox
            .events
            .iter()
            .filter(|(id, _)| *id > after)
            .cloned()
            .collect()
    }

    pub fn last_event_id(&self) -> u64 {
        lock(&self.inner).outbox.next_event_id - 1
    }

    /// Wait until at least one event newer than `after` exists or the session
    /// closes. Returns the new events (empty iff closed with nothing pending).
    pub async fn wait_events_after(&self, after: u64) -> Vec<(u64, RpcEnvelope)> {
        loop {
            let mut notified = std::pin::pin!(self.wake.notified());
            notified.as_mut().enable();
            let events = self.events_after(after);
            if !events.is_empty() || self.is_closed() {
                return events;
            }
            notified.await;
        }
    }

    /// Held while a request on this session is dispatched.
    pub async fn dispatch_guard(&self) -> tokio::sync::MutexGuard<'_, ()> {
        self.dispatch.lock().await
    }
}

/// All sessions of one server.
#[derive(Debug)]
pub(crate) struct SessionTable {
    sessions: Mutex<HashMap<String, Arc<SessionHandle>>>,
    limit: Mutex<usize>,
}

impl SessionTable {
    pub(crate) fn new(limit: usize) -> Self {
        Self {
            sessions: Mutex::new(HashMap::new()),
            limit: Mutex::new(limit.max(1)),
        }
    }

    pub(crate) fn set_limit(&self, limit: usize) {
        *lock(&self.limit) = limit.max(1);
    }

    pub(crate) fn open(&self, kind: TransportKind) -> Result<Arc<SessionHandle>, SessionError> {
        let limit = *lock(&self.limit);
        let mut sessions = lock(&self.sessions);
        if sessions.len() >= limit {
            return Err(SessionError::SessionLimit(limit));
        }
        let id = uuid::Uuid::new_v4().simple().to_string();
        let handle = Arc::new(SessionHandle::new(id.clone(), kind));
        sessions.insert(id, handle.clone());
        Ok(handle)
    }

    pub(crate) fn get(&self, id: &str) -> Result<Arc<SessionHandle>, SessionError> {
        lock(&self.sessions)
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))
    }

    pub(crate) fn close(&self, id: &str) -> Result<(), SessionError> {
        let handle = lock(&self.sessions)
            .remove(id)
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))?;
        handle.set_lifecycle(Lifecycle::Closed);
        Ok(())
    }

    pub(crate) fn open_sessions(&self) -> Vec<Arc<SessionHandle>> {
        let mut all: Vec<_> = lock(&self.sessions).values().cloned().collect();
        all.sort_by(|a, b| a.id().cmp(b.id()));
        all
    }

    pub(crate) fn len(&self) -> usize {
        lock(&self.sessions).len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn ids_are_pairwise_distinct() {
        let table = SessionTable::new(1000);
        let ids: std::collections::HashSet<_> = (0..100)
            .map(|_| table.open(TransportKind::Http).unwrap().id().to_string())
            .collect();
        assert_eq!(ids.len(), 100);
    }

    #[test]
    fn limit_is_enforced() {
        let table = SessionTable::new(2);
        table.open(TransportKind::Http).unwrap();
        table.open(TransportKind::Http).unwrap();
        assert_eq!(
            table.open(TransportKind::Http).unwrap_err(),
            SessionError::SessionLimit(2)
        );
    }

    #[test]
    fn closed_session_rejects_pushes_and_lookup() {
        let table = SessionTable::new(4);
        let s = table.open(TransportKind::Stdio).unwrap();
        assert_eq!(s.push(RpcEnvelope::notification("a", Value::Null)), Some(1));
        table.close(s.id()).unwrap();
        assert!(s.is_closed());
        assert_eq!(s.push(RpcEnvelope::notification("b", Value::Null)), None);
        assert!(matches!(table.get(s.id()), Err(SessionError::UnknownSession(_))));
        // Already-queued events remain readable for a final flush.
        assert_eq!(s.events_after(0).len(), 1);
    }

    #[test]
    fn event_ids_increase_and_resume_works() {
        let table = SessionTable::new(4);
        let s = table.open(TransportKind::Http).unwrap();
        for i in 0..5 {
            s.push(RpcEnvelope::notification(format!("n{i}"), Value::Null));
        }
        let tail = s.events_after(3);
        assert_eq!(tail.iter().map(|(id, _)| *id).collect::<Vec<_>>(), vec![4, 5]);
        assert_eq!(s.last_event_id(), 5);
    }
}
