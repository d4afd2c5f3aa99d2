//! A full simulated deployment built from one fixture: every backend, its
//! MCP server, the shared clock and the token service.

use scimcp_core::{GrantVerifier, McpServer, ServerBuilder, SiteSpec};
use std::sync::Arc;

use crate::auth::TokenService;
use crate::clock::SimClock;
use crate::compute::{self, ComputeService};
use crate::events::{self, EventService};
use crate::fixture::{Fixture, FixtureError};
use crate::search::{self, SearchService};
use crate::status::{self, StatusService};
use crate::transfer::{self, TransferService};

/// Backend server names in canonical order.
pub const SERVER_NAMES: [&str; 5] = ["transfer", "compute", "search", "status", "events"];

pub struct Deployment {
    pub fixture: Fixture,
    pub clock: Arc<SimClock>,
    pub auth: Arc<TokenService>,
    pub transfer: Arc<TransferService>,
    pub compute: Arc<ComputeService>,
    pub search: Arc<SearchService>,
    pub status: Arc<StatusService>,
    pub events: Arc<EventService>,
    servers: Vec<Arc<McpServer>>,
}

impl std::fmt::Debug for Deployment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Deployment")
            .field("clock", &self.clock.now())
            .field("servers", &self.server_ids())
            .finish_non_exhaustive()
    }
}

fn invalid(e: impl std::fmt::Display) -> FixtureError {
    FixtureError::Invalid(e.to_string())
}

impl Deployment {
    pub fn from_fixture(fixture: Fixture) -> Result<Self, FixtureError> {
        fixture.validate()?;
        let clock = Arc::new(SimClock::new(fixture.clock.start, fixture.clock.mode));
        let auth = Arc::new(TokenService::new(
            fixture.auth.users.clone(),
            clock.clone(),
            fixture.auth.ttl_ticks,
        ));
        let transfer = Arc::new(TransferService::from_fixture(&fixture.collections, clock.clone()).map_err(invalid)?);
        transfer.inject_path_failures(fixture.faults.transfer_path_failures);
        let compute = Arc::new(ComputeService::from_fixture(&fixture.compute, clock.clone()).map_err(invalid)?);
        let search = Arc::new(SearchService::from_fixture(&fixture.search, clock.clone()).map_err(invalid)?);
        let status = Arc::new(StatusService::from_fixture(&fixture.systems, clock.clone()));
        let events = Arc::new(EventService::from_fixture(&fixture.topics, clock.clone()).map_err(invalid)?);

        let verifier: Option<Arc<dyn GrantVerifier>> =
            fixture.auth.enforce.then(|| auth.clone() as Arc<dyn GrantVerifier>);
        let finish = |b: ServerBuilder| -> Result<Arc<McpServer>, FixtureError> {
            let b = b.version(env!("CARGO_PKG_VERSION"));
            match &verifier {
                Some(v) => b.verifier(v.clone()),
                None => b,
            }
            .build()
            .map_err(invalid)
        };
        let servers = vec![
            finish(transfer::server(transfer.clone()))?,
            finish(compute::server(compute.clone(), &fixture.compute.tools))?,
            finish(search::server(search.clone()))?,
            finish(status::server(status.clone()))?,
            finish(events::server(events.clone()))?,
        ];
        Ok(Self {
            fixture,
            clock,
            auth,
            transfer,
            compute,
            search,
            status,
            events,
            servers,
        })
    }

    pub fn servers(&self) -> &[Arc<McpServer>] {
        &self.servers
    }

    pub fn server(&self, id: &str) -> Option<&Arc<McpServer>> {
        self.servers.iter().find(|s| s.server_id() == id)
    }

    pub fn server_ids(&self) -> Vec<&str> {
        self.servers.iter().map(|s| s.server_id()).collect()
    }

    pub fn sites(&self) -> &[SiteSpec] {
        &self.fixture.sites
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use scimcp_core::LocalClient;
    use serde_json::json;

    const FIXTURE: &str = r#"{
        "auth": {"users": [{"user_id": "u", "secret": "s", "entitlements": ["*"]}]},
        "sites": [{"site_id": "s1", "software": ["python"], "resources": ["cpu"]}],
        "collections": [{"collection_id": "c1", "files": {"/a.txt": "abc"}}, {"collection_id": "c2"}],
        "compute": {"endpoints": [{"endpoint_id": "e1", "site_id": "s1", "catalog": {"word_count": "word_count"}}]},
        "systems": [{"system_name": "sys1"}, {"system_name": "sys2"}],
        "topics": [{"name": "changes", "events": ["x"]}]
    }"#;

    fn deployment() -> Deployment {
        Deployment::from_fixture(Fixture::from_json(FIXTURE).unwrap()).unwrap()
    }

    #[test]
    fn five_servers_in_canonical_order() {
        let d = deployment();
        assert_eq!(d.server_ids(), SERVER_NAMES);
        assert!(d.servers().iter().all(|s| s.requires_auth()));
    }

    #[test]
    fn status_server_has_one_resource_per_system() {
        let d = deployment();
        assert_eq!(d.server("status").unwrap().resources().len(), 2);
    }

    #[test]
    fn scoped_call_requires_grant() {
        let d = deployment();
        let client = LocalClient::connect(d.server("transfer").unwrap().clone()).unwrap();
        let err = client.call_tool("list_collections", json!({}), None).unwrap_err();
        assert_eq!(err.code, 1008);
        let cred = crate::Credential {
            user_id: "u".into(),
            secret: "s".into(),
        };
        let grant = d.auth.acquire(&cred, &["transfer:read".into()]).unwrap();
        let out = client
            .call_tool("list_collections", json!({}), Some(&grant.token))
            .unwrap();
        assert!(!out.is_error);
        assert_eq!(out.structured["collections"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn service_error_becomes_tool_failure() {
        let d = deployment();
        let cred = crate::Credential {
            user_id: "u".into(),
            secret: "s".into(),
        };
        let grant = d.auth.acquire(&cred, &["transfer:read".into()]).unwrap();
        let client = LocalClient::connect(d.server("transfer").unwrap().clone()).unwrap();
        let out = client
            .call_tool(
                "list_directory",
                json!({"collection_id": "c1", "path": "/missing"}),
                Some(&grant.token),
            )
            .unwrap();
        assert!(out.is_error);
        assert_eq!(out.structured["error_class"], "NO_SUCH_PATH");
    }
}
