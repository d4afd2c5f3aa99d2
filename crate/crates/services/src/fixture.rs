//! Deployment fixture: one JSON document describing every simulated
//! backend's initial state. The top-level README describes the format.

use scimcp_core::{RequirementSet, SiteSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::Path;

use crate::auth::UserAccount;
use crate::clock::ClockMode;
use crate::events::TopicConfig;
use crate::status::Health;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    #[serde(default)]
    pub clock: ClockFixture,
    #[serde(default)]
    pub auth: AuthFixture,
    #[serde(default)]
    pub sites: Vec<SiteSpec>,
    #[serde(default)]
    pub collections: Vec<CollectionFixture>,
    #[serde(default)]
    pub compute: ComputeFixture,
    #[serde(default)]
    pub search: SearchFixture,
    #[serde(default)]
    pub systems: Vec<SystemFixture>,
    #[serde(default)]
    pub topics: Vec<TopicFixture>,
    #[serde(default)]
    pub faults: FaultFixture,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClockFixture {
    #[serde(default)]
    pub start: u64,
    #[serde(default)]
    pub mode: ClockMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthFixture {
    /// Attach the token service to every server so scoped tools demand a grant.
    #[serde(default = "default_true")]
    pub enforce: bool,
    #[serde(default = "default_ttl")]
    pub ttl_ticks: u64,
    #[serde(default)]
    pub users: Vec<UserAccount>,
}

fn default_true() -> bool {
    true
}

fn default_ttl() -> u64 {
    crate::auth::TokenService::DEFAULT_TTL
}

impl Default for AuthFixture {
    fn default() -> Self {
        Self {
            enforce: true,
            ttl_ticks: default_ttl(),
            users: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionFixture {
    pub collection_id: String,
    #[serde(default)]
    pub display_name: String,
    /// path -> UTF-8 content
    #[serde(default)]
    pub files: BTreeMap<String, String>,
    #[serde(default)]
    pub dirs: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComputeFixture {
    #[serde(default)]
    pub endpoints: Vec<EndpointFixture>,
    /// Site-targeted convenience tools that submit a catalog task.
    #[serde(default)]
    pub tools: Vec<ComputeToolFixture>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointFixture {
    pub endpoint_id: String,
    pub site_id: String,
    /// catalog name -> task kind
    #[serde(default)]
    pub catalog: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputeToolFixture {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Catalog task name submitted when the tool is called.
    pub task: String,
    #[serde(default)]
    pub requirements: RequirementSet,
    /// Schema of the task arguments (the tool adds a required `site`).
    #[serde(default)]
    pub input_schema: Option<Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchFixture {
    #[serde(default)]
    pub indexes: Vec<IndexFixture>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexFixture {
    pub index_id: String,
    #[serde(default)]
    pub records: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFixture {
    pub system_name: String,
    #[serde(default = "default_health")]
    pub health: Health,
    #[serde(default)]
    pub queue_depth: u64,
    #[serde(default)]
    pub running_jobs: u64,
    #[serde(default)]
    pub utilization: f64,
    /// `[start, end)` tick windows.
    #[serde(default)]
    pub maintenance_windows: Vec<(u64, u64)>,
}

fn default_health() -> Health {
    Health::Up
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicFixture {
    pub name: String,
    #[serde(default)]
    pub config: TopicConfig,
    /// Payloads published at load time, in order.
    #[serde(default)]
    pub events: Vec<String>,
}

/// Deterministic failure injection.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FaultFixture {
    /// The next N transfer submissions fail with NO_SUCH_SOURCE_PATH even
    /// when the source exists.
    #[serde(default)]
    pub transfer_path_failures: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("cannot read fixture {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed fixture {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("invalid fixture: {0}")]
    Invalid(String),
}

impl Fixture {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, FixtureError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| FixtureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            FixtureError::Parse { source, .. } => FixtureError::Parse {
                path: path.display().to_string(),
                source,
            },
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, FixtureError> {
        let fixture: Fixture = serde_json::from_str(text).map_err(|source| FixtureError::Parse {
            path: "<inline>".into(),
            source,
        })?;
        fixture.validate()?;
        Ok(fixture)
    }

    pub fn validate(&self) -> Result<(), FixtureError> {
        let mut ids = std::collections::HashSet::new();
        for site in &self.sites {
            site.validate()
                .map_err(|e| FixtureError::Invalid(format!("site {}: {e}", site.site_id)))?;
            if !ids.insert(&site.site_id) {
                return Err(FixtureError::Invalid(format!("duplicate site {}", site.site_id)));
            }
        }
        for ep in &self.compute.endpoints {
            if !self.sites.iter().any(|s| s.site_id == ep.site_id) {
                return Err(FixtureError::Invalid(format!(
                    "endpoint {} references unknown site {}",
                    ep.endpoint_id, ep.site_id
                )));
            }
        }
        for sys in &self.systems {
            let mut windows = sys.maintenance_windows.clone();
            windows.sort();
            for w in &windows {
                if w.0 >= w.1 {
                    return Err(FixtureError::Invalid(format!(
                        "system {}: maintenance window [{}, {}) is empty",
                        sys.system_name, w.0, w.1
                    )));
                }
            }
            for pair in windows.windows(2) {
                if pair[1].0 < pair[0].1 {
                    return Err(FixtureError::Invalid(format!(
                        "system {}: overlapping maintenance windows",
                        sys.system_name
                    )));
                }
            }
            if !(0.0..=1.0).contains(&sys.utilization) {
                return Err(FixtureError::Invalid(format!(
                    "system {}: utilization must be in [0, 1]",
                    sys.system_name
                )));
            }
        }
        Ok(())
    }
}
