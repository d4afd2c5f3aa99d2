//! Deployment config file.

use anyhow::{bail, Context};
use scimcp_discovery::index::DocStrategy;
use scimcp_transport::TransportConfig;
use serde::Deserialize;
use std::path::{Path, PathBuf};

use crate::{TransportChoice, FIXTURE_ENV};

/// Every server `serve` can host, in listener order.
pub const SERVER_IDS: [&str; 7] = ["transfer", "compute", "search", "status", "events", "discovery", "auth"];

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscoveryPaths {
    pub corpus: Option<PathBuf>,
    pub benchmark: Option<PathBuf>,
    #[serde(default)]
    pub strategy: Option<DocStrategy>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentConfig {
    pub fixture: Option<PathBuf>,
    /// Empty means every server the config can support.
    #[serde(default)]
    pub servers: Vec<String>,
    #[serde(default)]
    pub transport: TransportChoice,
    #[serde(default)]
    pub http: TransportConfig,
    #[serde(default)]
    pub discovery: DiscoveryPaths,
}

fn must_exist(path: &Path, what: &str) -> anyhow::Result<()> {
    if !path.exists() {
        bail!("{what} {} does not exist", path.display());
    }
    Ok(())
}

impl DeploymentConfig {
    /// Parse and check a config file. Relative paths resolve against its
    /// directory and must exist.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut c: Self =
            serde_json::from_str(&text).with_context(|| format!("malformed config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut c.fixture, &mut c.discovery.corpus, &mut c.discovery.benchmark]
            .into_iter()
            .flatten()
        {
            *p = base.join(&*p);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if let Some(f) = &self.fixture {
            must_exist(f, "fixture")?;
        }
        if let Some(p) = &self.discovery.corpus {
            must_exist(p, "corpus")?;
        }
        if let Some(p) = &self.discovery.benchmark {
            must_exist(p, "benchmark")?;
        }
        for s in &self.servers {
            if !SERVER_IDS.contains(&s.as_str()) {
                bail!("unknown server {s:?}; expected one of {}", SERVER_IDS.join(", "));
            }
        }
        self.http.validate()?;
        Ok(())
    }
}

/// Flag, then file, then the environment.
pub fn resolve_fixture(flag: Option<&Path>, from_file: Option<&Path>) -> Option<PathBuf> {
    flag.or(from_file)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(FIXTURE_ENV).map(PathBuf::from))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_resolve_against_the_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("fx.json"), "{}").unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"fixture": "fx.json", "servers": ["status"]}"#).unwrap();
        let c = DeploymentConfig::load(&cfg).unwrap();
        assert_eq!(c.fixture.unwrap(), dir.path().join("fx.json"));
        assert_eq!(c.transport, TransportChoice::Http);
    }

    #[test]
    fn missing_paths_and_unknown_servers_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"fixture": "absent.json"}"#).unwrap();
        let e = DeploymentConfig::load(&cfg).unwrap_err().to_string();
        assert!(e.contains("absent.json"), "{e}");
        std::fs::write(&cfg, r#"{"servers": ["printer"]}"#).unwrap();
        assert!(DeploymentConfig::load(&cfg).is_err());
        std::fs::write(&cfg, r#"{"surprise": 1}"#).unwrap();
        assert!(DeploymentConfig::load(&cfg).is_err());
    }

    #[test]
    fn shipped_config_loads() {
        let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/deployment.json");
        let c = DeploymentConfig::load(&p).unwrap();
        assert!(c.fixture.unwrap().ends_with("fixture.json"));
        assert_eq!(c.discovery.strategy, Some(DocStrategy::NameDescHelpReadme));
    }
}
