//! Simulated file transfer between collections.
//!
//! A submitted task snapshots its source immediately and lands the bytes at
//! the destination once the clock reaches its completion tick. Progress is
//! settled lazily at the start of every operation.

use scimcp_core::{McpServer, TaskPolling, ToolDescriptor};
use serde::Serialize;
use serde_json::json;
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use crate::args::{handler, req_str, to_value};
use crate::clock::SimClock;
use crate::error::ServiceError;
use crate::fixture::CollectionFixture;
use crate::vfs::{normalize_path, DirEntry, FileEntry, VirtualTree};

/// Bytes moved per simulated tick.
pub const BYTES_PER_TICK: u64 = 1 << 20;

pub const NO_SUCH_SOURCE_PATH: &str = "NO_SUCH_SOURCE_PATH";

pub fn transfer_ticks(bytes: u64) -> u64 {
    bytes.div_ceil(BYTES_PER_TICK).max(1)
}

#[derive(Debug)]
pub struct Collection {
    pub collection_id: String,
    pub display_name: String,
    pub root: VirtualTree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferStatus {
    Queued,
    Active,
    Succeeded,
    Failed,
}

impl TransferStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, TransferStatus::Succeeded | TransferStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Endpoint {
    pub collection_id: String,
    pub path: String,
}

/// Argument correction a caller can apply when resubmitting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RetryHint {
    pub argument: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransferTask {
    pub task_id: String,
    pub src: Endpoint,
    pub dst: Endpoint,
    pub status: TransferStatus,
    pub bytes: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_detail: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retry_hint: Option<RetryHint>,
    pub submitted_at: u64,
    pub completes_at: u64,
}

#[derive(Debug)]
struct Pending {
    /// (destination path, bytes) written on completion.
    writes: Vec<(String, Vec<u8>)>,
}

#[derive(Debug, Default)]
struct TaskTable {
    tasks: BTreeMap<String, TransferTask>,
    pending: BTreeMap<String, Pending>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CollectionSummary {
    pub collection_id: String,
    pub display_name: String,
    pub file_count: usize,
    pub total_bytes: u64,
}

#[derive(Debug)]
pub struct TransferService {
    collections: BTreeMap<String, RwLock<Collection>>,
    tasks: RwLock<TaskTable>,
    clock: Arc<SimClock>,
    next_id: AtomicU64,
    injected_failures: AtomicU32,
}

fn read<T>(lock: &RwLock<T>) -> RwLockReadGuard<'_, T> {
    lock.read().unwrap_or_else(|p| p.into_inner())
}

fn write<T>(lock: &RwLock<T>) -> RwLockWriteGuard<'_, T> {
    lock.write().unwrap_or_else(|p| p.into_inner())
}

fn join(base: &str, rel: &str) -> String {
    match (base, rel) {
        (b, "") => b.to_string(),
        ("/", r) => format!("/{r}"),
        (b, r) => format!("{b}/{r}"),
    }
}

impl TransferService {
    pub fn new(collections: Vec<Collection>, clock: Arc<SimClock>) -> Self {
        Self {
            collections: collections
                .into_iter()
                .map(|c| (c.collection_id.clone(), RwLock::new(c)))
                .collect(),
            tasks: RwLock::new(TaskTable::default()),
            clock,
            next_id: AtomicU64::new(1),
            injected_failures: AtomicU32::new(0),
        }
    }

    pub fn from_fixture(fixtures: &[CollectionFixture], clock: Arc<SimClock>) -> Result<Self, ServiceError> {
        let start = clock.now();
        let mut collections = Vec::new();
        for f in fixtures {
            let mut root = VirtualTree::new();
            for d in &f.dirs {
                root.mkdir(d)?;
            }
            for (path, content) in &f.files {
                root.write(path, content.as_bytes().to_vec(), start)?;
            }
            collections.push(Collection {
                collection_id: f.collection_id.clone(),
                display_name: if f.display_name.is_empty() {
                    f.collection_id.clone()
                } else {
                    f.display_name.clone()
                },
                root,
            });
        }
        Ok(Self::new(collections, clock))
    }

    /// The next `n` submissions fail with a source path error regardless of
    /// whether the source exists.
    pub fn inject_path_failures(&self, n: u32) {
        self.injected_failures.store(n, Ordering::SeqCst);
    }

    fn collection(&self, id: &str) -> Result<&RwLock<Collection>, ServiceError> {
        self.collections
            .get(id)
            .ok_or_else(|| ServiceError::UnknownCollection(id.to_string()))
    }

    /// Land every task whose completion tick has passed.
    fn settle(&self, now: u64) {
        let mut table = write(&self.tasks);
        let due: Vec<String> = table
            .pending
            .keys()
            .filter(|id| table.tasks[*id].completes_at <= now)
            .cloned()
            .collect();
        for id in due {
            let pending = table.pending.remove(&id).expect("due task is pending");
            let task = table.tasks.get_mut(&id).expect("pending task exists");
            let dst = self
                .collections
                .get(&task.dst.collection_id)
                .expect("validated at submit");
            let mut dst = write(dst);
            let mut result = Ok(());
            for (path, bytes) in pending.writes {
                result = result.and(dst.root.write(&path, bytes, task.completes_at));
            }
            match result {
                Ok(()) => task.status = TransferStatus::Succeeded,
                Err(e) => {
                    task.status = TransferStatus::Failed;
                    task.failure_reason = Some(e.class().to_string());
                    task.failure_detail = Some(e.to_string());
                }
            }
        }
        for task in table.tasks.values_mut() {
            if task.status == TransferStatus::Queued && now > task.submitted_at {
                task.status = TransferStatus::Active;
            }
        }
    }

    pub fn list_collections(&self) -> Vec<CollectionSummary> {
        let now = self.clock.on_operation();
        self.settle(now);
        self.collections
            .values()
            .map(|c| {
                let c = read(c);
                let (count, bytes) = c
                    .root
                    .files()
                    .fold((0, 0), |(n, b), (_, f)| (n + 1, b + f.content.len() as u64));
                CollectionSummary {
                    collection_id: c.collection_id.clone(),
                    display_name: c.display_name.clone(),
                    file_count: count,
                    total_bytes: bytes,
                }
            })
            .collect()
    }

    pub fn list_directory(&self, collection_id: &str, path: &str) -> Result<Vec<DirEntry>, ServiceError> {
        let now = self.clock.on_operation();
        self.settle(now);
        let path = normalize_path(path)?;
        let c = read(self.collection(collection_id)?);
        c.root.list(&path).ok_or_else(|| ServiceError::NoSuchPath {
            collection: collection_id.to_string(),
            path,
        })
    }

    pub fn read_file(&self, collection_id: &str, path: &str) -> Result<Vec<u8>, ServiceError> {
        let now = self.clock.on_operation();
        self.settle(now);
        let path = normalize_path(path)?;
        let c = read(self.collection(collection_id)?);
        c.root
            .file(&path)
            .map(|f| f.content.clone())
            .ok_or_else(|| ServiceError::NoSuchPath {
                collection: collection_id.to_string(),
                path,
            })
    }

    /// Files under `path` at the current tick, relative to `path`.
    pub fn snapshot(&self, collection_id: &str, path: &str) -> Result<Vec<(String, FileEntry)>, ServiceError> {
        self.settle(self.clock.now());
        let path = normalize_path(path)?;
        Ok(read(self.collection(collection_id)?).root.snapshot(&path))
    }

    pub fn write_file(&self, collection_id: &str, path: &str, content: Vec<u8>) -> Result<(), ServiceError> {
        let now = self.clock.on_operation();
        self.settle(now);
        write(self.collection(collection_id)?).root.write(path, content, now)
    }

    pub fn remove(&self, collection_id: &str, path: &str) -> Result<bool, ServiceError> {
        let now = self.clock.on_operation();
        self.settle(now);
        let path = normalize_path(path)?;
        Ok(write(self.collection(collection_id)?).root.remove(&path))
    }

    pub fn submit(&self, src: Endpoint, dst: Endpoint) -> Result<TransferTask, ServiceError> {
        let now = self.clock.on_operation();
        self.settle(now);
        let src_path = normalize_path(&src.path)?;
        let dst_path = normalize_path(&dst.path)?;
        let src_lock = self.collection(&src.collection_id)?;
        let dst_lock = self.collection(&dst.collection_id)?;

        // Read both trees under locks taken in canonical id order.
        let (snapshot, suggestion, dst_is_dir) = {
            let (first, second) = if src.collection_id <= dst.collection_id {
                (src_lock, dst_lock)
            } else {
                (dst_lock, src_lock)
            };
            let g1 = read(first);
            let g2 = if std::ptr::eq(first, second) {
                None
            } else {
                Some(read(second))
            };
            let (s, d) = if src.collection_id <= dst.collection_id {
                (&*g1, g2.as_deref().unwrap_or(&*g1))
            } else {
                (g2.as_deref().unwrap_or(&*g1), &*g1)
            };
            let exists = s.root.exists(&src_path);
            let snapshot = exists.then(|| s.root.snapshot(&src_path));
            let suggestion = if exists {
                Some(src_path.clone())
            } else {
                s.root.suggest(&src_path)
            };
            (snapshot, suggestion, d.root.is_dir(&dst_path))
        };

        let id = format!("transfer-{:06}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let src_ep = Endpoint {
            collection_id: src.collection_id,
            path: src_path.clone(),
        };
        let dst_ep = Endpoint {
            collection_id: dst.collection_id,
            path: dst_path.clone(),
        };

        let injected = self
            .injected_failures
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok();
        let snapshot = if injected { None } else { snapshot };

        let mut table = write(&self.tasks);
        let task = match snapshot {
            None => TransferTask {
                task_id: id.clone(),
                src: src_ep,
                dst: dst_ep,
                status: TransferStatus::Failed,
                bytes: 0,
                failure_reason: Some(NO_SUCH_SOURCE_PATH.to_string()),
                failure_detail: Some(match &suggestion {
                    Some(p) if injected => format!("source path {src_path} could not be read; retry with {p}"),
                    Some(p) => format!("source path {src_path} does not exist; did you mean {p}?"),
                    None => format!("source path {src_path} does not exist"),
                }),
                retry_hint: suggestion.map(|value| RetryHint {
                    argument: "src_path".into(),
                    value,
                }),
                submitted_at: now,
                completes_at: now,
            },
            Some(files) => {
                let single_file = files.len() == 1 && files[0].0.is_empty();
                let base = if single_file && dst_is_dir {
                    join(&dst_path, src_path.rsplit('/').next().unwrap_or_default())
                } else {
                    dst_path.clone()
                };
                let bytes: u64 = files.iter().map(|(_, f)| f.content.len() as u64).sum();
                let writes = files
                    .into_iter()
                    .map(|(rel, f)| (join(&base, &rel), f.content))
                    .collect();
                table.pending.insert(id.clone(), Pending { writes });
                TransferTask {
                    task_id: id.clone(),
                    src: src_ep,
                    dst: dst_ep,
                    status: TransferStatus::Queued,
                    bytes,
                    failure_reason: None,
                    failure_detail: None,
                    retry_hint: None,
                    submitted_at: now,
                    completes_at: now + transfer_ticks(bytes),
                }
            }
        };
        table.tasks.insert(id, task.clone());
        Ok(task)
    }

    pub fn status(&self, task_id: &str) -> Result<TransferTask, ServiceError> {
        let now = self.clock.on_operation();
        self.settle(now);
        read(&self.tasks)
            .tasks
            .get(task_id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownTask(task_id.to_string()))
    }

    pub fn tasks(&self) -> Vec<TransferTask> {
        self.settle(self.clock.now());
        read(&self.tasks).tasks.values().cloned().collect()
    }
}

pub fn tool_descriptors() -> Vec<ToolDescriptor> {
    vec![
        ToolDescriptor::new(
            "list_collections",
            "List the storage collections reachable through the transfer service.",
        )
        .with_scope("transfer:read"),
        ToolDescriptor::new(
            "list_directory",
            "Browse the files and directories at a path inside a collection.",
        )
        .with_input_schema(json!({
            "type": "object",
            "properties": {
                "collection_id": {"type": "string"},
                "path": {"type": "string"}
            },
            "required": ["collection_id", "path"],
            "additionalProperties": false
        }))
        .with_scope("transfer:read"),
        ToolDescriptor::new(
            "submit_transfer",
            "Transfer a file or directory from one collection to another. Returns a task id to monitor.",
        )
        .with_input_schema(json!({
            "type": "object",
            "properties": {
                "src_collection": {"type": "string"},
                "src_path": {"type": "string"},
                "dst_collection": {"type": "string"},
                "dst_path": {"type": "string"}
            },
            "required": ["src_collection", "src_path", "dst_collection", "dst_path"],
            "additionalProperties": false
        }))
        .with_output_schema(json!({
            "type": "object",
            "properties": {"task_id": {"type": "string"}, "status": {"type": "string"}},
            "required": ["task_id"]
        }))
        .with_scope("transfer:write")
        .with_polling(TaskPolling {
            status_tool: "get_transfer_status".into(),
            result_tool: None,
        }),
        ToolDescriptor::new(
            "get_transfer_status",
            "Report the lifecycle state, byte count and any failure reason of a transfer task.",
        )
        .with_input_schema(json!({
            "type": "object",
            "properties": {"task_id": {"type": "string"}},
            "required": ["task_id"],
            "additionalProperties": false
        }))
        .with_scope("transfer:read"),
    ]
}

/// The MCP server exposing `service`.
pub fn server(service: Arc<TransferService>) -> scimcp_core::ServerBuilder {
    let mut tools = tool_descriptors().into_iter();
    let mut next = || tools.next().expect("four transfer tools");
    let s1 = service.clone();
    let s2 = service.clone();
    let s3 = service.clone();
    let s4 = service;
    McpServer::builder("transfer")
        .instructions("Move data between storage collections and monitor transfer tasks.")
        .tool(
            next(),
            handler(move |_, _| Ok(json!({"collections": to_value(&s1.list_collections())}))),
        )
        .tool(
            next(),
            handler(move |_, args| {
                let entries = s2.list_directory(req_str(args, "collection_id")?, req_str(args, "path")?)?;
                Ok(json!({"entries": to_value(&entries)}))
            }),
        )
        .tool(
            next(),
            handler(move |_, args| {
                let task = s3.submit(
                    Endpoint {
                        collection_id: req_str(args, "src_collection")?.to_string(),
                        path: req_str(args, "src_path")?.to_string(),
                    },
                    Endpoint {
                        collection_id: req_str(args, "dst_collection")?.to_string(),
                        path: req_str(args, "dst_path")?.to_string(),
                    },
                )?;
                Ok(json!({"task_id": task.task_id, "status": to_value(&task.status)}))
            }),
        )
        .tool(
            next(),
            handler(move |_, args| Ok(to_value(&s4.status(req_str(args, "task_id")?)?))),
        )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn service() -> (TransferService, Arc<SimClock>) {
        let clock = Arc::new(SimClock::manual());
        let svc = TransferService::from_fixture(
            &[
                CollectionFixture {
                    collection_id: "alpha".into(),
                    display_name: "Alpha".into(),
                    files: [("/projects/seq/data.fasta".to_string(), "abc".to_string())].into(),
                    dirs: vec![],
                },
                CollectionFixture {
                    collection_id: "beta".into(),
                    display_name: String::new(),
                    files: BTreeMap::new(),
                    dirs: vec![],
                },
            ],
            clock.clone(),
        )
        .unwrap();
        (svc, clock)
    }

    fn ep(c: &str, p: &str) -> Endpoint {
        Endpoint {
            collection_id: c.into(),
            path: p.into(),
        }
    }

    #[test]
    fn collections_and_listing() {
        let (svc, _) = service();
        let ids: Vec<_> = svc.list_collections().into_iter().map(|c| c.collection_id).collect();
        assert_eq!(ids, ["alpha", "beta"]);
        assert!(svc.list_directory("beta", "/").unwrap().is_empty());
        assert!(matches!(
            svc.list_directory("alpha", "/missing"),
            Err(ServiceError::NoSuchPath { .. })
        ));
        assert!(matches!(
            svc.list_directory("gamma", "/"),
            Err(ServiceError::UnknownCollection(_))
        ));
    }

    #[test]
    fn small_transfer_completes_after_one_tick() {
        let (svc, clock) = service();
        let t = svc
            .submit(ep("alpha", "/projects/seq/data.fasta"), ep("beta", "/in/data.fasta"))
            .unwrap();
        assert_eq!(t.status, TransferStatus::Queued);
        clock.advance(1);
        let t = svc.status(&t.task_id).unwrap();
        assert_eq!(t.status, TransferStatus::Succeeded);
        assert_eq!(t.bytes, 3);
        assert_eq!(svc.read_file("beta", "/in/data.fasta").unwrap(), b"abc");
    }

    #[test]
    fn large_transfer_passes_through_active() {
        let (svc, clock) = service();
        svc.write_file("alpha", "/big.bin", vec![7u8; (BYTES_PER_TICK * 2 + 1) as usize])
            .unwrap();
        let t = svc.submit(ep("alpha", "/big.bin"), ep("beta", "/")).unwrap();
        assert_eq!(t.completes_at - t.submitted_at, 3);
        clock.advance(1);
        assert_eq!(svc.status(&t.task_id).unwrap().status, TransferStatus::Active);
        clock.advance(2);
        assert_eq!(svc.status(&t.task_id).unwrap().status, TransferStatus::Succeeded);
        assert_eq!(
            svc.read_file("beta", "/big.bin").unwrap().len() as u64,
            BYTES_PER_TICK * 2 + 1
        );
    }

    #[test]
    fn bad_source_fails_immediately_with_hint() {
        let (svc, _) = service();
        let t = svc
            .submit(ep("alpha", "/eagle/projects/seq/data.fasta"), ep("beta", "/x"))
            .unwrap();
        assert_eq!(t.status, TransferStatus::Failed);
        assert_eq!(t.failure_reason.as_deref(), Some(NO_SUCH_SOURCE_PATH));
        assert_eq!(t.retry_hint.unwrap().value, "/projects/seq/data.fasta");
    }

    #[test]
    fn unknown_task_and_destination() {
        let (svc, _) = service();
        assert!(matches!(
            svc.status("transfer-999999"),
            Err(ServiceError::UnknownTask(_))
        ));
        assert!(matches!(
            svc.submit(ep("alpha", "/projects"), ep("nowhere", "/")),
            Err(ServiceError::UnknownCollection(_))
        ));
    }

    #[test]
    fn injected_failure_then_success() {
        let (svc, clock) = service();
        svc.inject_path_failures(1);
        let t1 = svc
            .submit(ep("alpha", "/projects/seq/data.fasta"), ep("beta", "/d"))
            .unwrap();
        assert_eq!(t1.status, TransferStatus::Failed);
        let t2 = svc
            .submit(ep("alpha", "/projects/seq/data.fasta"), ep("beta", "/d"))
            .unwrap();
        clock.advance(1);
        assert_eq!(svc.status(&t2.task_id).unwrap().status, TransferStatus::Succeeded);
    }

    #[test]
    fn snapshot_is_taken_at_submit() {
        let (svc, clock) = service();
        let t = svc.submit(ep("alpha", "/projects"), ep("beta", "/copy")).unwrap();
        svc.write_file("alpha", "/projects/seq/data.fasta", b"changed".to_vec())
            .unwrap();
        svc.remove("alpha", "/projects/seq/data.fasta").unwrap();
        clock.advance(1);
        assert_eq!(svc.status(&t.task_id).unwrap().status, TransferStatus::Succeeded);
        assert_eq!(svc.read_file("beta", "/copy/seq/data.fasta").unwrap(), b"abc");
    }

    #[test]
    fn same_collection_copy() {
        let (svc, clock) = service();
        let t = svc
            .submit(ep("alpha", "/projects/seq"), ep("alpha", "/backup"))
            .unwrap();
        clock.advance(1);
        assert_eq!(svc.status(&t.task_id).unwrap().status, TransferStatus::Succeeded);
        assert_eq!(svc.read_file("alpha", "/backup/data.fasta").unwrap(), b"abc");
    }
}
