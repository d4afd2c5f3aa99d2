//! Simulated record search with an inverted index.
//!
//! Records are JSON objects keyed by a `subject` string. Every string value
//! in the rest of the record is tokenized (lowercase alphanumeric runs) into
//! the index. Queries are conjunctive over their terms and ranked by summed
//! term frequency, ties broken by ascending subject.

use scimcp_core::{McpServer, ServerBuilder, ToolDescriptor};
use serde::Serialize;
use serde_json::{json, Map, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, RwLock};

use crate::args::{handler, opt_u64, req_str, to_value};
use crate::clock::SimClock;
use crate::error::ServiceError;
use crate::fixture::SearchFixture;

pub const SUBJECT_KEY: &str = "subject";
pub const DEFAULT_LIMIT: usize = 10;

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn collect_strings<'a>(v: &'a Value, out: &mut Vec<&'a str>) {
    match v {
        Value::String(s) => out.push(s),
        Value::Array(items) => items.iter().for_each(|i| collect_strings(i, out)),
        Value::Object(map) => map.values().for_each(|i| collect_strings(i, out)),
        _ => {}
    }
}

/// Term frequencies of a document (the record minus its subject).
pub fn term_frequencies(document: &Map<String, Value>) -> BTreeMap<String, u64> {
    let mut strings = Vec::new();
    for (k, v) in document {
        if k != SUBJECT_KEY {
            collect_strings(v, &mut strings);
        }
    }
    let mut tf = BTreeMap::new();
    for s in strings {
        for t in tokenize(s) {
            *tf.entry(t).or_default() += 1;
        }
    }
    tf
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchHit {
    pub subject: String,
    pub score: u64,
    pub document: Value,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchIndexState {
    pub index_id: String,
    pub records: BTreeMap<String, Map<String, Value>>,
    /// term -> subjects containing it
    pub term_map: BTreeMap<String, BTreeSet<String>>,
    tf: BTreeMap<String, BTreeMap<String, u64>>,
}

impl SearchIndexState {
    pub fn new(index_id: impl Into<String>) -> Self {
        Self {
            index_id: index_id.into(),
            ..Self::default()
        }
    }

    /// A fresh index built from `records` in one pass.
    pub fn rebuilt(&self) -> Self {
        let mut fresh = Self::new(self.index_id.clone());
        for (subject, doc) in &self.records {
            fresh.insert(subject.clone(), doc.clone());
        }
        fresh
    }

    fn unindex(&mut self, subject: &str) {
        if let Some(tf) = self.tf.remove(subject) {
            for term in tf.keys() {
                if let Some(set) = self.term_map.get_mut(term) {
                    set.remove(subject);
                    if set.is_empty() {
                        self.term_map.remove(term);
                    }
                }
            }
        }
        self.records.remove(subject);
    }

    fn insert(&mut self, subject: String, document: Map<String, Value>) {
        self.unindex(&subject);
        let tf = term_frequencies(&document);
        for term in tf.keys() {
            self.term_map.entry(term.clone()).or_default().insert(subject.clone());
        }
        self.tf.insert(subject.clone(), tf);
        self.records.insert(subject, document);
    }

    /// Insert or replace records. Each must be an object with a string subject.
    pub fn ingest(&mut self, records: &[Value]) -> Result<usize, ServiceError> {
        let mut parsed = Vec::with_capacity(records.len());
        for r in records {
            let obj = r
                .as_object()
                .ok_or_else(|| ServiceError::InvalidArgument("records must be objects".into()))?;
            let subject = obj
                .get(SUBJECT_KEY)
                .and_then(Value::as_str)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| ServiceError::InvalidArgument("record needs a non-empty string subject".into()))?
                .to_string();
            let mut doc = obj.clone();
            doc.remove(SUBJECT_KEY);
            parsed.push((subject, doc));
        }
        let n = parsed.len();
        for (subject, doc) in parsed {
            self.insert(subject, doc);
        }
        Ok(n)
    }

    pub fn delete(&mut self, subjects: &[String]) -> usize {
        subjects
            .iter()
            .filter(|s| {
                let present = self.records.contains_key(*s);
                self.unindex(s);
                present
            })
            .count()
    }

    pub fn query(&self, query: &str, limit: usize) -> Vec<SearchHit> {
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        if terms.is_empty() {
            return Vec::new();
        }
        let mut candidates: Option<BTreeSet<&String>> = None;
        for t in &terms {
            let Some(set) = self.term_map.get(t) else {
                return Vec::new();
            };
            candidates = Some(match candidates {
                None => set.iter().collect(),
                Some(c) => c.into_iter().filter(|s| set.contains(*s)).collect(),
            });
        }
        let mut hits: Vec<SearchHit> = candidates
            .unwrap_or_default()
            .into_iter()
            .map(|subject| {
                let tf = &self.tf[subject];
                SearchHit {
                    subject: subject.clone(),
                    score: terms.iter().map(|t| tf.get(t).copied().unwrap_or(0)).sum(),
                    document: Value::Object(self.records[subject].clone()),
                }
            })
            .collect();
        hits.sort_by(|a, b| b.score.cmp(&a.score).then_with(|| a.subject.cmp(&b.subject)));
        hits.truncate(limit);
        hits
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexSummary {
    pub index_id: String,
    pub record_count: usize,
    pub term_count: usize,
}

#[derive(Debug)]
pub struct SearchService {
    indexes: RwLock<BTreeMap<String, SearchIndexState>>,
    clock: Arc<SimClock>,
}

impl SearchService {
    pub fn new(clock: Arc<SimClock>) -> Self {
        Self {
            indexes: RwLock::new(BTreeMap::new()),
            clock,
        }
    }

    pub fn from_fixture(fixture: &SearchFixture, clock: Arc<SimClock>) -> Result<Self, ServiceError> {
        let svc = Self::new(clock);
        for idx in &fixture.indexes {
            svc.create_index(&idx.index_id)?;
            svc.ingest(&idx.index_id, &idx.records)?;
        }
        Ok(svc)
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, BTreeMap<String, SearchIndexState>> {
        self.indexes.read().unwrap_or_else(|p| p.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, BTreeMap<String, SearchIndexState>> {
        self.indexes.write().unwrap_or_else(|p| p.into_inner())
    }

    pub fn create_index(&self, id: &str) -> Result<(), ServiceError> {
        self.clock.on_operation();
        if !scimcp_core::descriptor::is_valid_token(id) {
            return Err(ServiceError::InvalidArgument(format!(
                "index id {id:?} is not a valid token"
            )));
        }
        let mut idx = self.write();
        if idx.contains_key(id) {
            return Err(ServiceError::DuplicateIndex(id.to_string()));
        }
        idx.insert(id.to_string(), SearchIndexState::new(id));
        Ok(())
    }

    pub fn delete_index(&self, id: &str) -> Result<(), ServiceError> {
        self.clock.on_operation();
        self.write()
            .remove(id)
            .map(|_| ())
            .ok_or_else(|| ServiceError::UnknownIndex(id.to_string()))
    }

    pub fn list_indexes(&self) -> Vec<IndexSummary> {
        self.clock.on_operation();
        self.read()
            .values()
            .map(|i| IndexSummary {
                index_id: i.index_id.clone(),
                record_count: i.records.len(),
                term_count: i.term_map.len(),
            })
            .collect()
    }

    pub fn ingest(&self, id: &str, records: &[Value]) -> Result<usize, ServiceError> {
        self.clock.on_operation();
        self.write()
            .get_mut(id)
            .ok_or_else(|| ServiceError::UnknownIndex(id.to_string()))?
            .ingest(records)
    }

    pub fn delete_records(&self, id: &str, subjects: &[String]) -> Result<usize, ServiceError> {
        self.clock.on_operation();
        Ok(self
            .write()
            .get_mut(id)
            .ok_or_else(|| ServiceError::UnknownIndex(id.to_string()))?
            .delete(subjects))
    }

    pub fn query(&self, id: &str, query: &str, limit: usize) -> Result<Vec<SearchHit>, ServiceError> {
        self.clock.on_operation();
        Ok(self
            .read()
            .get(id)
            .ok_or_else(|| ServiceError::UnknownIndex(id.to_string()))?
            .query(query, limit))
    }

    /// Clone of an index's state, for oracle comparisons.
    pub fn index_state(&self, id: &str) -> Option<SearchIndexState> {
        self.read().get(id).cloned()
    }
}

fn index_id_schema() -> Value {
    json!({
        "type": "object",
        "properties": {"index_id": {"type": "string"}},
        "required": ["index_id"],
        "additionalProperties": false
    })
}

pub fn server(service: Arc<SearchService>) -> ServerBuilder {
    let (s1, s2, s3, s4, s5, s6) = (
        service.clone(),
        service.clone(),
        service.clone(),
        service.clone(),
        service.clone(),
        service,
    );
    McpServer::builder("search")
        .instructions("Manage search indexes and ingest, delete and query records.")
        .tool(
            ToolDescriptor::new("create_index", "Create an empty search index.")
                .with_input_schema(index_id_schema())
                .with_scope("search:admin"),
            handler(move |_, args| {
                let id = req_str(args, "index_id")?;
                s1.create_index(id)?;
                Ok(json!({"index_id": id, "created": true}))
            }),
        )
        .tool(
            ToolDescriptor::new("delete_index", "Delete a search index and all of its records.")
                .with_input_schema(index_id_schema())
                .with_scope("search:admin"),
            handler(move |_, args| {
                let id = req_str(args, "index_id")?;
                s2.delete_index(id)?;
                Ok(json!({"index_id": id, "deleted": true}))
            }),
        )
        .tool(
            ToolDescriptor::new("list_indexes", "List search indexes with record and term counts.")
                .with_scope("search:read"),
            handler(move |_, _| Ok(json!({"indexes": to_value(&s3.list_indexes())}))),
        )
        .tool(
            ToolDescriptor::new(
                "ingest",
                "Add or replace records in an index. Each record is an object with a string subject.",
            )
            .with_input_schema(json!({
                "type": "object",
                "properties": {
                    "index_id": {"type": "string"},
                    "records": {"type": "array", "items": {"type": "object"}}
                },
                "required": ["index_id", "records"],
                "additionalProperties": false
            }))
            .with_scope("search:write"),
            handler(move |_, args| {
                let id = req_str(args, "index_id")?;
                let records = args["records"].as_array().cloned().unwrap_or_default();
                Ok(json!({"index_id": id, "ingested": s4.ingest(id, &records)?}))
            }),
        )
        .tool(
            ToolDescriptor::new("delete_records", "Remove records from an index by subject.")
                .with_input_schema(json!({
                    "type": "object",
                    "properties": {
                        "index_id": {"type": "string"},
                        "subjects": {"type": "array", "items": {"type": "string"}}
                    },
                    "required": ["index_id", "subjects"],
                    "additionalProperties": false
                }))
                .with_scope("search:write"),
            handler(move |_, args| {
                let id = req_str(args, "index_id")?;
                let subjects: Vec<String> = args["subjects"]
                    .as_array()
                    .into_iter()
                    .flatten()
                    .filter_map(|v| v.as_str().map(String::from))
                    .collect();
                Ok(json!({"index_id": id, "deleted": s5.delete_records(id, &subjects)?}))
            }),
        )
        .tool(
            ToolDescriptor::new(
                "query",
                "Find records containing every query term, ranked by term frequency.",
            )
            .with_input_schema(json!({
                "type": "object",
                "properties": {
                    "index_id": {"type": "string"},
                    "query": {"type": "string"},
                    "limit": {"type": "integer", "minimum": 1}
                },
                "required": ["index_id", "query"],
                "additionalProperties": false
            }))
            .with_scope("search:read"),
            handler(move |_, args| {
                let limit = opt_u64(args, "limit").map_or(DEFAULT_LIMIT, |l| l as usize);
                let hits = s6.query(req_str(args, "index_id")?, req_str(args, "query")?, limit)?;
                Ok(json!({"total": hits.len(), "hits": to_value(&hits)}))
            }),
        )
}
