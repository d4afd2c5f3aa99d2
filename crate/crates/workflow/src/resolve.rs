//! Binding abstract tasks to feasible (site, capability, server) tuples.

use scimcp_core::{LocalClient, McpServer, ServerIdentity, SiteSpec, ToolDescriptor};
use scimcp_discovery::MATERIALIZED_PREFIX;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fmt;
use std::sync::Arc;

use crate::error::WorkflowError;
use crate::plan::{AbstractPlan, AbstractTask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub task_id: String,
    pub goal_kind: String,
    pub site_id: String,
    pub capability: String,
    pub server_id: String,
    /// Task parameters, with `site` filled in when the capability takes one.
    /// May still hold `${label}` references.
    pub arguments: Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub produces: Vec<String>,
    /// Whether the capability was materialized by a discovery query.
    #[serde(default)]
    pub via_discovery: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConcretePlan {
    pub bindings: Vec<Binding>,
}

/// A capability serves a goal when its name is the goal kind, directly or
/// as a materialized discovery tool.
pub fn capability_matches(goal_kind: &str, tool_name: &str) -> bool {
    tool_name == goal_kind || tool_name.strip_prefix(MATERIALIZED_PREFIX) == Some(goal_kind)
}

/// Live on the server, and the site provides every required package and
/// resource tag.
pub fn is_feasible(site: &SiteSpec, capability: &ToolDescriptor, server: &ServerIdentity) -> bool {
    server.capability_names.contains(&capability.name) && site.satisfies(&capability.requirements)
}

/// One (server, capability, site) candidate that matched the goal but failed
/// feasibility.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateMiss {
    pub server_id: String,
    pub capability: String,
    pub site_id: String,
    pub missing_software: Vec<String>,
    pub missing_resources: Vec<String>,
}

impl CandidateMiss {
    fn distance(&self) -> usize {
        self.missing_software.len() + self.missing_resources.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnresolvedTask {
    pub task_id: String,
    pub goal_kind: String,
    pub discovery_attempted: bool,
    /// Nearest misses first.
    pub candidates: Vec<CandidateMiss>,
}

impl fmt::Display for UnresolvedTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "no feasible binding for task {} (goal {})",
            self.task_id, self.goal_kind
        )?;
        match self.candidates.first() {
            None => {
                write!(f, ": no capability named {} on any server", self.goal_kind)?;
                if self.discovery_attempted {
                    f.write_str(", and discovery did not provide one")?;
                }
                Ok(())
            }
            Some(c) => write!(
                f,
                "; closest: {} on {} at site {} lacks software [{}] resources [{}] ({} candidate(s) checked)",
                c.capability,
                c.server_id,
                c.site_id,
                c.missing_software.join(", "),
                c.missing_resources.join(", "),
                self.candidates.len()
            ),
        }
    }
}

const MAX_DIAGNOSTICS: usize = 16;

enum Lookup {
    Found(Binding),
    Missed(Vec<CandidateMiss>),
}

fn bind(
    task: &AbstractTask,
    server: &McpServer,
    tool: &ToolDescriptor,
    site: &SiteSpec,
    via_discovery: bool,
) -> Binding {
    let mut arguments = task.params.clone();
    if tool.declares_param("site") {
        if let Some(obj) = arguments.as_object_mut() {
            obj.entry("site").or_insert_with(|| json!(site.site_id));
        }
    }
    Binding {
        task_id: task.task_id.clone(),
        goal_kind: task.goal_kind.clone(),
        site_id: site.site_id.clone(),
        capability: tool.name.clone(),
        server_id: server.server_id().to_string(),
        arguments,
        produces: task.produces.clone(),
        via_discovery,
    }
}

fn lookup(task: &AbstractTask, servers: &[&Arc<McpServer>], sites: &[&SiteSpec], via_discovery: bool) -> Lookup {
    let mut misses = Vec::new();
    for server in servers {
        let identity = server.identity();
        for tool in server
            .tools()
            .iter()
            .filter(|t| capability_matches(&task.goal_kind, &t.name))
        {
            // Sites are pre-sorted, so the first satisfying one is the pick.
            if let Some(site) = sites.iter().find(|s| is_feasible(s, tool, &identity)) {
                return Lookup::Found(bind(task, server, tool, site, via_discovery));
            }
            misses.extend(sites.iter().map(|s| {
                let (missing_software, missing_resources) = s.missing(&tool.requirements);
                CandidateMiss {
                    server_id: identity.server_id.clone(),
                    capability: tool.name.clone(),
                    site_id: s.site_id.clone(),
                    missing_software,
                    missing_resources,
                }
            }));
        }
    }
    misses.sort_by_key(CandidateMiss::distance);
    misses.truncate(MAX_DIAGNOSTICS);
    Lookup::Missed(misses)
}

/// A discovery server consulted when no registered capability matches a
/// goal, and how many tools each query may materialize.
#[derive(Clone)]
pub struct DiscoveryLink {
    pub server: Arc<McpServer>,
    pub k: usize,
}

/// Free text sent to `find_tools` for a task: its goal plus string params.
pub fn discovery_query(task: &AbstractTask) -> String {
    let mut words = vec![task.goal_kind.replace('_', " ")];
    if let Some(obj) = task.params.as_object() {
        words.extend(
            obj.values()
                .filter_map(Value::as_str)
                .filter(|s| !s.contains("${"))
                .map(str::to_string),
        );
    }
    words.join(" ")
}

/// Resolve stage. Servers are scanned in registration order (the discovery
/// server last), their tools in tool order, and sites by `site_id`. A task
/// with no matching capability triggers one `find_tools` round on the
/// discovery server, after which matching is retried once.
pub fn resolve(
    plan: &AbstractPlan,
    servers: &[Arc<McpServer>],
    sites: &[SiteSpec],
    discovery: Option<&DiscoveryLink>,
) -> Result<ConcretePlan, WorkflowError> {
    let mut candidates: Vec<&Arc<McpServer>> = servers.iter().collect();
    if let Some(DiscoveryLink { server: d, .. }) = discovery {
        if !servers.iter().any(|s| s.server_id() == d.server_id()) {
            candidates.push(d);
        }
    }
    let mut ordered: Vec<&SiteSpec> = sites.iter().collect();
    ordered.sort_by(|a, b| a.site_id.cmp(&b.site_id));

    let mut discovery_client: Option<LocalClient> = None;
    let mut bindings = Vec::with_capacity(plan.tasks.len());
    for task in &plan.tasks {
        let misses = match lookup(task, &candidates, &ordered, false) {
            Lookup::Found(b) => {
                bindings.push(b);
                continue;
            }
            Lookup::Missed(m) => m,
        };
        let discovery_attempted = misses.is_empty() && discovery.is_some();
        let misses = match discovery.filter(|_| discovery_attempted) {
            Some(link) => {
                if discovery_client.is_none() {
                    discovery_client = LocalClient::connect(link.server.clone()).ok();
                }
                if let Some(c) = &discovery_client {
                    let _ = c.call_tool(
                        scimcp_discovery::server::FIND_TOOLS,
                        json!({"query": discovery_query(task), "k": link.k}),
                        None,
                    );
                }
                match lookup(task, &candidates, &ordered, true) {
                    Lookup::Found(b) => {
                        bindings.push(b);
                        continue;
                    }
                    Lookup::Missed(m) => m,
                }
            }
            None => misses,
        };
        return Err(WorkflowError::UnresolvedTask(UnresolvedTask {
            task_id: task.task_id.clone(),
            goal_kind: task.goal_kind.clone(),
            discovery_attempted,
            candidates: misses,
        }));
    }
    Ok(ConcretePlan { bindings })
}
