//! The discovery MCP server.
//!
//! It starts with a single `find_tools` tool. Each call retrieves the top-k
//! documents for the query and registers any not yet live as
//! `disc__<tool_id>`, then tells every open session the tool list changed.

use scimcp_core::{CallContext, McpServer, ServerBuilder, ToolDescriptor, ToolFailure, ToolHandler};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::sync::Arc;

use crate::corpus::ToolDocument;
use crate::embed::Embedder;
use crate::error::DiscoveryError;
use crate::index::{build_index, retrieve, DocStrategy, VectorIndex};

pub const MATERIALIZED_PREFIX: &str = "disc__";
pub const DEFAULT_K: usize = 5;
pub const FIND_TOOLS: &str = "find_tools";

pub struct DiscoveryServer {
    docs: HashMap<String, ToolDocument>,
    index: VectorIndex,
    embedder: Arc<dyn Embedder>,
}

impl DiscoveryServer {
    pub fn new(
        corpus: Vec<ToolDocument>,
        strategy: DocStrategy,
        embedder: Arc<dyn Embedder>,
    ) -> Result<Arc<Self>, DiscoveryError> {
        let index = build_index(&corpus, strategy, embedder.as_ref())?;
        Ok(Arc::new(Self {
            docs: corpus.into_iter().map(|d| (d.tool_id.clone(), d)).collect(),
            index,
            embedder,
        }))
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    pub fn document(&self, tool_id: &str) -> Option<&ToolDocument> {
        self.docs.get(tool_id)
    }

    /// Descriptor a document materializes as.
    pub fn materialized_descriptor(doc: &ToolDocument) -> ToolDescriptor {
        let mut d = doc.descriptor.clone();
        d.name = format!("{MATERIALIZED_PREFIX}{}", doc.tool_id);
        if d.description.is_empty() {
            d.description = doc.description.clone();
        }
        d
    }

    /// Server with the static `find_tools` tool bound to this index.
    pub fn builder(self: &Arc<Self>) -> ServerBuilder {
        let this = self.clone();
        McpServer::builder("discovery")
            .instructions(
                "Call find_tools with a description of the task; matching tools are added to this server.",
            )
            .tool(
                ToolDescriptor::new(
                    FIND_TOOLS,
                    "Search the tool catalog for tools matching a task description and make the top matches callable on this server.",
                )
                .with_input_schema(json!({
                    "type": "object",
                    "properties": {
                        "query": {"type": "string"},
                        "k": {"type": "integer"}
                    },
                    "required": ["query"],
                    "additionalProperties": false
                }))
                .with_scope("discovery:read"),
                FindTools(this),
            )
    }

    pub fn find_tools(&self, server: &McpServer, query: &str, k: i64) -> Result<Value, DiscoveryError> {
        if k < 1 {
            return Err(DiscoveryError::InvalidK(k));
        }
        if query.trim().is_empty() {
            return Err(DiscoveryError::EmptyQuery);
        }
        let hits = retrieve(&self.index, self.embedder.as_ref(), query, k as usize)?;
        let tools: Vec<(ToolDescriptor, Arc<dyn ToolHandler>)> = hits
            .iter()
            .map(|(id, _)| {
                let doc = &self.docs[id];
                (
                    Self::materialized_descriptor(doc),
                    Arc::new(Materialized {
                        tool_id: doc.tool_id.clone(),
                    }) as Arc<dyn ToolHandler>,
                )
            })
            .collect();
        let added = server
            .add_tools_if_absent(tools)
            .expect("corpus descriptors validate at load and names are unique");
        let notified = if added.is_empty() {
            0
        } else {
            server.notify_tools_list_changed()
        };
        let summary: Vec<Value> = hits
            .iter()
            .map(|(id, score)| {
                let name = format!("{MATERIALIZED_PREFIX}{id}");
                json!({
                    "name": name,
                    "tool_id": id,
                    "score": score,
                    "description": self.docs[id].description,
                    "newly_added": added.contains(&name),
                })
            })
            .collect();
        Ok(json!({
            "query": query,
            "k": k,
            "tools": summary,
            "added": added.len(),
            "sessions_notified": notified,
        }))
    }
}

struct FindTools(Arc<DiscoveryServer>);

impl ToolHandler for FindTools {
    fn call(&self, ctx: &CallContext<'_>, args: &Value) -> Result<Value, ToolFailure> {
        let query = args.get("query").and_then(Value::as_str).unwrap_or_default();
        let k = match args.get("k") {
            None | Some(Value::Null) => DEFAULT_K as i64,
            Some(v) => v
                .as_i64()
                .ok_or_else(|| ToolFailure::from(DiscoveryError::InvalidK(0)).with("given", v.clone()))?,
        };
        Ok(self.0.find_tools(ctx.server(), query, k)?)
    }
}

/// Simulated execution of a materialized tool: a stable digest of its inputs.
struct Materialized {
    tool_id: String,
}

impl ToolHandler for Materialized {
    fn call(&self, _ctx: &CallContext<'_>, args: &Value) -> Result<Value, ToolFailure> {
        let canonical = serde_json::to_string(args).expect("json values serialize");
        let mut h = Sha256::new();
        h.update(self.tool_id.as_bytes());
        h.update(b"\0");
        h.update(canonical.as_bytes());
        let digest = hex::encode(h.finalize());
        Ok(json!({
            "tool_id": self.tool_id,
            "status": "completed",
            "digest": digest,
            "outputs": [format!("{}-{}.out", self.tool_id, &digest[..8])],
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::TrigramEmbedder;
    use scimcp_core::LocalClient;

    fn corpus() -> Vec<ToolDocument> {
        [
            (
                "gffcompare",
                "compare and evaluate the accuracy of RNA-Seq transcript assemblers",
            ),
            ("bwa_mem", "align sequencing reads to a reference genome"),
            ("fasttree", "infer approximately maximum likelihood phylogenetic trees"),
            ("multiqc", "aggregate quality control reports across samples"),
        ]
        .iter()
        .map(|(id, d)| ToolDocument {
            tool_id: id.to_string(),
            name: id.to_string(),
            description: d.to_string(),
            help_text: String::new(),
            readme: String::new(),
            descriptor: ToolDescriptor::new(*id, *d).with_input_schema(json!({
                "type": "object",
                "properties": {"input": {"type": "string"}}
            })),
        })
        .collect()
    }

    fn server() -> Arc<McpServer> {
        DiscoveryServer::new(corpus(), DocStrategy::NameDesc, Arc::new(TrigramEmbedder::default()))
            .unwrap()
            .builder()
            .build()
            .unwrap()
    }

    #[test]
    fn find_tools_materializes_and_notifies() {
        let s = server();
        let a = LocalClient::connect(s.clone()).unwrap();
        let b = LocalClient::connect(s.clone()).unwrap();
        let q = "I need a tool to compare and evaluate the accuracy of RNA-Seq transcript assemblers";
        let out = a.call_tool("find_tools", json!({"query": q, "k": 2}), None).unwrap();
        assert_eq!(out.structured["tools"][0]["name"], "disc__gffcompare");
        assert_eq!(s.tool_count(), 3);
        assert_eq!(a.list_changed_count(), 1);
        assert_eq!(b.list_changed_count(), 1);
        let again = a.call_tool("find_tools", json!({"query": q, "k": 2}), None).unwrap();
        assert_eq!(again.structured["added"], 0);
        assert_eq!(again.structured["tools"].as_array().unwrap().len(), 2);
        assert_eq!(a.list_changed_count(), 0);
        let run = a
            .call_tool("disc__gffcompare", json!({"input": "x.gtf"}), None)
            .unwrap();
        assert!(!run.is_error);
        assert_eq!(run.structured["tool_id"], "gffcompare");
    }

    #[test]
    fn default_k_and_errors() {
        let s = server();
        let c = LocalClient::connect(s.clone()).unwrap();
        let out = c.call_tool("find_tools", json!({"query": "trees"}), None).unwrap();
        // Corpus has 4 tools, fewer than the default k.
        assert_eq!(out.structured["tools"].as_array().unwrap().len(), 4);
        let bad = c.call_tool("find_tools", json!({"query": "x", "k": 0}), None).unwrap();
        assert!(bad.is_error);
        assert_eq!(bad.structured["error_class"], "INVALID_K");
        let empty = c.call_tool("find_tools", json!({"query": "  "}), None).unwrap();
        assert_eq!(empty.structured["error_class"], "EMPTY_QUERY");
    }

    #[test]
    fn materialized_tools_are_deterministic() {
        let s = server();
        let c = LocalClient::connect(s).unwrap();
        c.call_tool("find_tools", json!({"query": "genome reads", "k": 1}), None)
            .unwrap();
        let x = c.call_tool("disc__bwa_mem", json!({"input": "r.fq"}), None).unwrap();
        let y = c.call_tool("disc__bwa_mem", json!({"input": "r.fq"}), None).unwrap();
        assert_eq!(x.structured, y.structured);
    }
}
