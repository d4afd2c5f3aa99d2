use anyhow::{anyhow, bail, Context};
use scimcp_core::McpServer;
use scimcp_discovery::index::DocStrategy;
use scimcp_discovery::{load_corpus, DiscoveryServer, TrigramEmbedder};
use scimcp_services::{Deployment, Fixture};
use scimcp_transport::{serve_http, serve_stdio, HttpServer, TransportConfig, TransportError};
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use crate::config::{resolve_fixture, DeploymentConfig, SERVER_IDS};
use crate::{ExitCodeExt, Failure, TransportChoice, EXIT_BIND, EXIT_INPUT, EXIT_MISMATCH};

#[derive(Debug, Default)]
pub struct ServeArgs {
    pub config: Option<PathBuf>,
    pub fixture: Option<PathBuf>,
    pub transport: Option<TransportChoice>,
    pub bind: Option<String>,
    pub servers: Vec<String>,
    pub corpus: Option<PathBuf>,
}

/// Everything `serve` needs after flags and config are merged.
pub struct Plan {
    pub transport: TransportChoice,
    pub http: TransportConfig,
    pub servers: Vec<Arc<McpServer>>,
}

pub fn prepare(args: ServeArgs) -> anyhow::Result<Plan> {
    let mut cfg = match &args.config {
        Some(p) => DeploymentConfig::load(p)?,
        None => DeploymentConfig::default(),
    };
    if let Some(t) = args.transport {
        cfg.transport = t;
    }
    if let Some(b) = args.bind {
        cfg.http.bind_address = b;
    }
    if !args.servers.is_empty() {
        cfg.servers = args.servers;
    }
    if let Some(c) = args.corpus {
        cfg.discovery.corpus = Some(c);
    }
    cfg.validate()?;

    let fixture_path = resolve_fixture(args.fixture.as_deref(), cfg.fixture.as_deref()).ok_or_else(|| {
        anyhow!(
            "no fixture: pass --fixture, set it in the config, or set {}",
            crate::FIXTURE_ENV
        )
    })?;
    let fixture = Fixture::load(&fixture_path).with_context(|| format!("fixture {}", fixture_path.display()))?;
    let deployment = Deployment::from_fixture(fixture)?;

    let wanted: Vec<&str> = if cfg.servers.is_empty() {
        SERVER_IDS
            .into_iter()
            .filter(|s| *s != "discovery" || cfg.discovery.corpus.is_some())
            .collect()
    } else {
        SERVER_IDS
            .into_iter()
            .filter(|s| cfg.servers.iter().any(|w| w == s))
            .collect()
    };
    let mut servers = Vec::new();
    for id in wanted {
        let server = match id {
            "discovery" => {
                let path = cfg
                    .discovery
                    .corpus
                    .as_ref()
                    .ok_or_else(|| anyhow!("the discovery server needs a corpus (--corpus)"))?;
                let corpus = load_corpus(path).with_context(|| format!("corpus {}", path.display()))?;
                let strategy = cfg.discovery.strategy.unwrap_or(DocStrategy::NameDescHelpReadme);
                DiscoveryServer::new(corpus, strategy, Arc::new(TrigramEmbedder::default()))?
                    .builder()
                    .version(env!("CARGO_PKG_VERSION"))
                    .build()?
            }
            "auth" => scimcp_services::auth::server(deployment.auth.clone())
                .version(env!("CARGO_PKG_VERSION"))
                .build()?,
            backend => deployment
                .server(backend)
                .cloned()
                .ok_or_else(|| anyhow!("fixture has no {backend} server"))?,
        };
        servers.push(server);
    }
    if servers.is_empty() {
        bail!("no servers selected");
    }
    if cfg.transport == TransportChoice::Stdio && servers.len() != 1 {
        bail!(
            "stdio carries one server; select exactly one with --servers (got {})",
            servers.len()
        );
    }
    Ok(Plan {
        transport: cfg.transport,
        http: cfg.http,
        servers,
    })
}

/// Bind one listener per server on consecutive ports. Port 0 gives each an
/// ephemeral port.
pub async fn bind_all(plan: &Plan) -> Result<Vec<HttpServer>, Failure> {
    let (_, base_port) = plan.http.host_port().exit(EXIT_INPUT)?;
    let mut running = Vec::new();
    for (i, server) in plan.servers.iter().enumerate() {
        let cfg = if base_port == 0 {
            plan.http.clone()
        } else {
            plan.http.shifted(i as u16).exit(EXIT_INPUT)?
        };
        match serve_http(server.clone(), &cfg).await {
            Ok(h) => running.push(h),
            Err(e @ TransportError::BindFailed { .. }) => return Err(Failure::new(EXIT_BIND, e)),
            Err(e) => return Err(Failure::new(EXIT_INPUT, e)),
        }
    }
    Ok(running)
}

pub fn run(args: ServeArgs) -> Result<(), Failure> {
    let plan = prepare(args).exit(EXIT_INPUT)?;
    let rt = tokio::runtime::Runtime::new().exit(EXIT_MISMATCH)?;
    rt.block_on(async move {
        match plan.transport {
            TransportChoice::Stdio => {
                let server = plan.servers[0].clone();
                eprintln!("serving {} on stdio", server.server_id());
                serve_stdio(server).await.exit(EXIT_MISMATCH)
            }
            TransportChoice::Http => {
                let running = bind_all(&plan).await?;
                {
                    let mut out = std::io::stdout().lock();
                    for h in &running {
                        let _ = writeln!(out, "serving {} at {}", h.server_id(), h.url());
                    }
                    let _ = writeln!(out, "ready: {} server(s)", running.len());
                    let _ = out.flush();
                }
                let waits = running.into_iter().map(|h| Box::pin(h.wait()));
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => Ok(()),
                    (res, _, _) = futures::future::select_all(waits) => res.context("listener stopped").exit(EXIT_MISMATCH),
                }
            }
        }
    })
}
