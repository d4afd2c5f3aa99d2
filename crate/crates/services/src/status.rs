//! Simulated facility status: health, queues, maintenance and utilization.

use scimcp_core::{McpServer, PromptArgument, PromptDescriptor, ResourceDescriptor, ServerBuilder, ToolDescriptor};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use crate::args::{handler, req_str, to_value};
use crate::clock::SimClock;
use crate::error::ServiceError;
use crate::fixture::SystemFixture;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Health {
    Up,
    Degraded,
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaintenanceWindow {
    pub start: u64,
    pub end: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FacilityStatus {
    pub system_name: String,
    pub health: Health,
    pub queue_depth: u64,
    pub running_jobs: u64,
    pub maintenance_windows: Vec<MaintenanceWindow>,
    pub utilization: f64,
}

impl FacilityStatus {
    fn active_window(&self, now: u64) -> Option<&MaintenanceWindow> {
        self.maintenance_windows.iter().find(|w| w.start <= now && now < w.end)
    }

    /// Health as observed at `now`: down while inside a maintenance window.
    pub fn health_at(&self, now: u64) -> Health {
        if self.active_window(now).is_some() {
            Health::Down
        } else {
            self.health
        }
    }
}

#[derive(Debug)]
pub struct StatusService {
    systems: RwLock<BTreeMap<String, FacilityStatus>>,
    clock: Arc<SimClock>,
}

impl StatusService {
    pub fn from_fixture(systems: &[SystemFixture], clock: Arc<SimClock>) -> Self {
        let systems = systems
            .iter()
            .map(|s| {
                let mut windows: Vec<MaintenanceWindow> = s
                    .maintenance_windows
                    .iter()
                    .map(|&(start, end)| MaintenanceWindow { start, end })
                    .collect();
                windows.sort_by_key(|w| w.start);
                (
                    s.system_name.clone(),
                    FacilityStatus {
                        system_name: s.system_name.clone(),
                        health: s.health,
                        queue_depth: s.queue_depth,
                        running_jobs: s.running_jobs,
                        maintenance_windows: windows,
                        utilization: s.utilization,
                    },
                )
            })
            .collect();
        Self {
            systems: RwLock::new(systems),
            clock,
        }
    }

    pub fn system_names(&self) -> Vec<String> {
        self.systems
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .keys()
            .cloned()
            .collect()
    }

    /// Read a system's record together with the observation tick.
    fn observe<T>(&self, system: &str, f: impl FnOnce(&FacilityStatus, u64) -> T) -> Result<T, ServiceError> {
        let now = self.clock.on_operation();
        let systems = self.systems.read().unwrap_or_else(|p| p.into_inner());
        let s = systems
            .get(system)
            .ok_or_else(|| ServiceError::UnknownSystem(system.to_string()))?;
        Ok(f(s, now))
    }

    pub fn health(&self, system: &str) -> Result<Value, ServiceError> {
        self.observe(system, |s, now| {
            let mut v = json!({
                "system": s.system_name,
                "health": to_value(&s.health_at(now)),
                "observed_at": now,
            });
            if let Some(w) = s.active_window(now) {
                v["reason"] = json!(format!("scheduled maintenance until tick {}", w.end));
            }
            v
        })
    }

    pub fn queue(&self, system: &str) -> Result<Value, ServiceError> {
        self.observe(system, |s, now| {
            let down = s.health_at(now) == Health::Down;
            json!({
                "system": s.system_name,
                "queue_depth": s.queue_depth,
                "running_jobs": if down { 0 } else { s.running_jobs },
                "accepting_jobs": !down,
            })
        })
    }

    pub fn maintenance(&self, system: &str) -> Result<Value, ServiceError> {
        self.observe(system, |s, now| {
            json!({
                "system": s.system_name,
                "windows": to_value(&s.maintenance_windows),
                "active": s.active_window(now).map(to_value),
                "next": s.maintenance_windows.iter().find(|w| w.start > now).map(to_value),
            })
        })
    }

    pub fn utilization(&self, system: &str) -> Result<Value, ServiceError> {
        self.observe(system, |s, now| {
            let u = if s.health_at(now) == Health::Down {
                0.0
            } else {
                s.utilization
            };
            json!({"system": s.system_name, "utilization": u})
        })
    }

    /// Full snapshot used by the per-system resource.
    pub fn snapshot(&self, system: &str) -> Result<Value, ServiceError> {
        self.observe(system, |s, now| {
            let mut v = to_value(s);
            v["health"] = to_value(&s.health_at(now));
            v["observed_at"] = json!(now);
            v
        })
    }
}

fn system_schema() -> Value {
    json!({
        "type": "object",
        "properties": {"system": {"type": "string"}},
        "required": ["system"],
        "additionalProperties": false
    })
}

pub const RESOURCE_PREFIX: &str = "facility://systems/";

pub fn server(service: Arc<StatusService>) -> ServerBuilder {
    let mut b = McpServer::builder("status")
        .instructions("Check facility system health, batch queues, maintenance schedules and utilization.");
    let s = service.clone();
    b = b.tool(
        ToolDescriptor::new("list_systems", "List the facility systems that report status.").with_scope("status:read"),
        handler(move |_, _| Ok(json!({"systems": s.system_names()}))),
    );
    type Getter = fn(&StatusService, &str) -> Result<Value, ServiceError>;
    let getters: [(&str, &str, Getter); 4] = [
        (
            "get_system_health",
            "Report whether a system is up, degraded or down.",
            StatusService::health,
        ),
        (
            "get_queue_status",
            "Report batch queue depth and running jobs on a system.",
            StatusService::queue,
        ),
        (
            "get_maintenance",
            "List scheduled maintenance windows for a system.",
            StatusService::maintenance,
        ),
        (
            "get_utilization",
            "Report the fraction of a system's capacity in use.",
            StatusService::utilization,
        ),
    ];
    for (name, desc, get) in getters {
        let s = service.clone();
        b = b.tool(
            ToolDescriptor::new(name, desc)
                .with_input_schema(system_schema())
                .with_scope("status:read"),
            handler(move |_, args| Ok(get(&s, req_str(args, "system")?)?)),
        );
    }
    for name in service.system_names() {
        let s = service.clone();
        let n = name.clone();
        b = b.resource(
            ResourceDescriptor {
                uri: format!("{RESOURCE_PREFIX}{name}"),
                name: name.clone(),
                description: format!("Current status of {name}"),
                media_type: "application/json".into(),
            },
            move || match s.snapshot(&n) {
                Ok(v) => v.to_string(),
                Err(e) => json!({"error": e.to_string()}).to_string(),
            },
        );
    }
    b.prompt(PromptDescriptor::new(
        "batch_submission",
        "Draft a batch job submission that respects current facility status.",
        vec![
            PromptArgument {
                name: "job_name".into(),
                description: "Name of the job".into(),
                required: true,
            },
            PromptArgument {
                name: "nodes".into(),
                description: "Node count to request".into(),
                required: true,
            },
        ],
        "Prepare a batch submission named {job_name} requesting {nodes} nodes. \
         Check get_system_health and get_queue_status first and avoid systems in maintenance.",
    ))
}
