//! Simulated event fabric: topics holding append-only logs with per-consumer
//! offsets.

use scimcp_core::{McpServer, ServerBuilder, ToolDescriptor};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeMap, VecDeque};
use std::sync::{Arc, RwLock};

use crate::args::{handler, opt_u64, req_str, to_value};
use crate::clock::SimClock;
use crate::error::ServiceError;
use crate::fixture::TopicFixture;

pub const DEFAULT_MAX_EVENTS: u64 = 100;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicConfig {
    /// Events older than this many ticks are dropped from the log start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retention_ticks: Option<u64>,
    /// Keep at most this many events; the oldest are dropped first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_events: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Event {
    pub offset: u64,
    pub timestamp: u64,
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConsumeResult {
    pub events: Vec<Event>,
    pub next_offset: u64,
}

#[derive(Debug, Clone, Default)]
pub struct Topic {
    pub name: String,
    pub config: TopicConfig,
    log: VecDeque<Event>,
    /// First readable offset.
    start: u64,
    /// Offset the next publish receives.
    end: u64,
    consumers: BTreeMap<String, u64>,
}

impl Topic {
    pub fn new(name: impl Into<String>, config: TopicConfig) -> Self {
        Self {
            name: name.into(),
            config,
            ..Self::default()
        }
    }

    pub fn start(&self) -> u64 {
        self.start
    }

    pub fn end(&self) -> u64 {
        self.end
    }

    pub fn retained(&self) -> impl Iterator<Item = &Event> {
        self.log.iter()
    }

    fn advance_start(&mut self, to: u64) {
        while self.log.front().is_some_and(|e| e.offset < to) {
            self.log.pop_front();
        }
        self.start = self.start.max(to);
    }

    fn enforce_retention(&mut self, now: u64) {
        if let Some(ttl) = self.config.retention_ticks {
            let cut = self
                .log
                .iter()
                .find(|e| e.timestamp + ttl > now)
                .map_or(self.end, |e| e.offset);
            self.advance_start(cut);
        }
        if let Some(max) = self.config.max_events {
            let len = self.end - self.start;
            if len > max {
                self.advance_start(self.end - max);
            }
        }
    }

    pub fn publish(&mut self, payload: String, now: u64) -> u64 {
        let offset = self.end;
        self.log.push_back(Event {
            offset,
            timestamp: now,
            payload,
        });
        self.end += 1;
        self.enforce_retention(now);
        offset
    }

    pub fn consume(&mut self, consumer: &str, max_events: u64, now: u64) -> ConsumeResult {
        self.enforce_retention(now);
        let from = self
            .consumers
            .get(consumer)
            .copied()
            .unwrap_or(self.start)
            .max(self.start);
        let take = max_events.min(self.end - from) as usize;
        let skip = (from - self.start) as usize;
        let events: Vec<Event> = self.log.iter().skip(skip).take(take).cloned().collect();
        let next_offset = from + events.len() as u64;
        self.consumers.insert(consumer.to_string(), next_offset);
        ConsumeResult { events, next_offset }
    }

    pub fn truncate(&mut self, up_to: u64) -> Result<(), ServiceError> {
        if up_to > self.end {
            return Err(ServiceError::TruncateBeyondEnd {
                topic: self.name.clone(),
                up_to,
                end: self.end,
            });
        }
        self.advance_start(up_to);
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TopicSummary {
    pub name: String,
    pub config: TopicConfig,
    pub start_offset: u64,
    pub end_offset: u64,
    pub consumers: usize,
}

#[derive(Debug)]
pub struct EventService {
    topics: RwLock<BTreeMap<String, Topic>>,
    clock: Arc<SimClock>,
}

impl EventService {
    pub fn new(clock: Arc<SimClock>) -> Self {
        Self {
            topics: RwLock::new(BTreeMap::new()),
            clock,
        }
    }

    pub fn from_fixture(topics: &[TopicFixture], clock: Arc<SimClock>) -> Result<Self, ServiceError> {
        let svc = Self::new(clock);
        for t in topics {
            svc.create_topic(&t.name, t.config.clone())?;
            for e in &t.events {
                svc.publish(&t.name, e.clone())?;
            }
        }
        Ok(svc)
    }

    fn with_topic<T>(&self, name: &str, f: impl FnOnce(&mut Topic, u64) -> T) -> Result<T, ServiceError> {
        let now = self.clock.on_operation();
        let mut topics = self.topics.write().unwrap_or_else(|p| p.into_inner());
        let topic = topics
            .get_mut(name)
            .ok_or_else(|| ServiceError::UnknownTopic(name.to_string()))?;
        Ok(f(topic, now))
    }

    pub fn create_topic(&self, name: &str, config: TopicConfig) -> Result<(), ServiceError> {
        self.clock.on_operation();
        if !scimcp_core::descriptor::is_valid_token(name) {
            return Err(ServiceError::InvalidArgument(format!(
                "topic name {name:?} is not a valid token"
            )));
        }
        let mut topics = self.topics.write().unwrap_or_else(|p| p.into_inner());
        if topics.contains_key(name) {
            return Err(ServiceError::DuplicateTopic(name.to_string()));
        }
        topics.insert(name.to_string(), Topic::new(name, config));
        Ok(())
    }

    pub fn delete_topic(&self, name: &str) -> Result<(), ServiceError> {
        self.clock.on_operation();
        self.topics
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .remove(name)
            .map(|_| ())
            .ok_or_else(|| ServiceError::UnknownTopic(name.to_string()))
    }

    pub fn update_config(&self, name: &str, config: TopicConfig) -> Result<TopicConfig, ServiceError> {
        self.with_topic(name, |t, now| {
            t.config = config;
            t.enforce_retention(now);
            t.config.clone()
        })
    }

    pub fn truncate(&self, name: &str, up_to: u64) -> Result<u64, ServiceError> {
        self.with_topic(name, |t, _| t.truncate(up_to).map(|()| t.start()))?
    }

    pub fn publish(&self, name: &str, payload: String) -> Result<u64, ServiceError> {
        self.with_topic(name, |t, now| t.publish(payload, now))
    }

    /// Returns at most `max_events` from the consumer's offset. The log is
    /// in-process, so a consumer at the log end gets an empty batch at once
    /// instead of waiting out a timeout.
    pub fn consume(&self, name: &str, consumer: &str, max_events: u64) -> Result<ConsumeResult, ServiceError> {
        self.with_topic(name, |t, now| t.consume(consumer, max_events, now))
    }

    pub fn list_topics(&self) -> Vec<TopicSummary> {
        self.clock.on_operation();
        self.topics
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .values()
            .map(|t| TopicSummary {
                name: t.name.clone(),
                config: t.config.clone(),
                start_offset: t.start,
                end_offset: t.end,
                consumers: t.consumers.len(),
            })
            .collect()
    }
}

fn topic_schema(extra: Value, required: &[&str]) -> Value {
    let mut props = json!({"topic": {"type": "string"}});
    if let (Some(p), Some(e)) = (props.as_object_mut(), extra.as_object()) {
        p.extend(e.clone());
    }
    let mut req = vec!["topic"];
    req.extend_from_slice(required);
    json!({"type": "object", "properties": props, "required": req, "additionalProperties": false})
}

fn config_props() -> Value {
    json!({
        "retention_ticks": {"type": "integer", "minimum": 1},
        "max_events": {"type": "integer", "minimum": 1}
    })
}

fn config_from(args: &Value) -> TopicConfig {
    TopicConfig {
        retention_ticks: opt_u64(args, "retention_ticks"),
        max_events: opt_u64(args, "max_events"),
    }
}

pub fn server(service: Arc<EventService>) -> ServerBuilder {
    let (s1, s2, s3, s4, s5, s6, s7) = (
        service.clone(),
        service.clone(),
        service.clone(),
        service.clone(),
        service.clone(),
        service.clone(),
        service,
    );
    McpServer::builder("events")
        .instructions("Create and manage event topics, publish events and consume them with tracked offsets.")
        .tool(
            ToolDescriptor::new(
                "create_topic",
                "Create an event topic with optional retention settings.",
            )
            .with_input_schema(topic_schema(config_props(), &[]))
            .with_scope("events:admin"),
            handler(move |_, args| {
                let name = req_str(args, "topic")?;
                s1.create_topic(name, config_from(args))?;
                Ok(json!({"topic": name, "created": true}))
            }),
        )
        .tool(
            ToolDescriptor::new("delete_topic", "Delete an event topic and its log.")
                .with_input_schema(topic_schema(json!({}), &[]))
                .with_scope("events:admin"),
            handler(move |_, args| {
                let name = req_str(args, "topic")?;
                s2.delete_topic(name)?;
                Ok(json!({"topic": name, "deleted": true}))
            }),
        )
        .tool(
            ToolDescriptor::new("update_config", "Replace a topic's retention configuration.")
                .with_input_schema(topic_schema(config_props(), &[]))
                .with_scope("events:admin"),
            handler(move |_, args| {
                let name = req_str(args, "topic")?;
                let cfg = s3.update_config(name, config_from(args))?;
                Ok(json!({"topic": name, "config": to_value(&cfg)}))
            }),
        )
        .tool(
            ToolDescriptor::new("truncate", "Drop every event before an offset.")
                .with_input_schema(topic_schema(
                    json!({"up_to_offset": {"type": "integer", "minimum": 0}}),
                    &["up_to_offset"],
                ))
                .with_scope("events:admin"),
            handler(move |_, args| {
                let name = req_str(args, "topic")?;
                let start = s4.truncate(name, opt_u64(args, "up_to_offset").unwrap_or(0))?;
                Ok(json!({"topic": name, "start_offset": start}))
            }),
        )
        .tool(
            ToolDescriptor::new("publish", "Append an event payload to a topic.")
                .with_input_schema(topic_schema(json!({"payload": {"type": "string"}}), &["payload"]))
                .with_scope("events:write"),
            handler(move |_, args| {
                let name = req_str(args, "topic")?;
                let offset = s5.publish(name, req_str(args, "payload")?.to_string())?;
                Ok(json!({"topic": name, "offset": offset}))
            }),
        )
        .tool(
            ToolDescriptor::new("consume", "Read the next events for a consumer and advance its offset.")
                .with_input_schema(topic_schema(
                    json!({
                        "consumer_id": {"type": "string"},
                        "max_events": {"type": "integer", "minimum": 1},
                        "timeout_ticks": {"type": "integer", "minimum": 0}
                    }),
                    &["consumer_id"],
                ))
                .with_scope("events:read"),
            handler(move |_, args| {
                let r = s6.consume(
                    req_str(args, "topic")?,
                    req_str(args, "consumer_id")?,
                    opt_u64(args, "max_events").unwrap_or(DEFAULT_MAX_EVENTS),
                )?;
                Ok(to_value(&r))
            }),
        )
        .tool(
            ToolDescriptor::new("list_topics", "List topics with their offsets and configuration.")
                .with_scope("events:read"),
            handler(move |_, _| Ok(json!({"topics": to_value(&s7.list_topics())}))),
        )
}
