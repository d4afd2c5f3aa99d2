use serde::{Deserialize, Serialize};
use std::time::Duration;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("max_sessions must be at least 1")]
    MaxSessions,
    #[error("read_timeout_ms must be positive")]
    ReadTimeout,
    #[error("bind_address must be host:port, got {0:?}")]
    BindAddress(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportConfig {
    /// host:port. Ignored by stdio.
    pub bind_address: String,
    pub max_sessions: usize,
    /// Budget for receiving a full request body.
    pub read_timeout_ms: u64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self {
            bind_address: "127.0.0.1:8700".into(),
            max_sessions: 1024,
            read_timeout_ms: 30_000,
        }
    }
}

impl TransportConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_sessions < 1 {
            return Err(ConfigError::MaxSessions);
        }
        if self.read_timeout_ms == 0 {
            return Err(ConfigError::ReadTimeout);
        }
        self.host_port()?;
        Ok(())
    }

    pub fn host_port(&self) -> Result<(&str, u16), ConfigError> {
        let bad = || ConfigError::BindAddress(self.bind_address.clone());
        let (host, port) = self.bind_address.rsplit_once(':').ok_or_else(bad)?;
        let host = host.trim_start_matches('[').trim_end_matches(']');
        if host.is_empty() {
            return Err(bad());
        }
        Ok((host, port.parse().map_err(|_| bad())?))
    }

    /// Same config listening `offset` ports higher.
    pub fn shifted(&self, offset: u16) -> Result<Self, ConfigError> {
        let (host, port) = self.host_port()?;
        let port = port
            .checked_add(offset)
            .ok_or_else(|| ConfigError::BindAddress(self.bind_address.clone()))?;
        let host = if host.contains(':') {
            format!("[{host}]")
        } else {
            host.to_string()
        };
        Ok(Self {
            bind_address: format!("{host}:{port}"),
            ..self.clone()
        })
    }

    pub fn read_timeout(&self) -> Duration {
        Duration::from_millis(self.read_timeout_ms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert_eq!(TransportConfig::default().validate(), Ok(()));
        let c = TransportConfig {
            max_sessions: 0,
            ..Default::default()
        };
        assert_eq!(c.validate(), Err(ConfigError::MaxSessions));
        let c = TransportConfig {
            read_timeout_ms: 0,
            ..Default::default()
        };
        assert_eq!(c.validate(), Err(ConfigError::ReadTimeout));
        let c = TransportConfig {
            bind_address: "localhost".into(),
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(ConfigError::BindAddress(_))));
    }

    #[test]
    fn shifting_ports() {
        let c = TransportConfig::default().shifted(3).unwrap();
        assert_eq!(c.bind_address, "127.0.0.1:8703");
        let v6 = TransportConfig {
            bind_address: "[::1]:9000".into(),
            ..Default::default()
        };
        assert_eq!(v6.shifted(1).unwrap().bind_address, "[::1]:9001");
        let top = TransportConfig {
            bind_address: "h:65535".into(),
            ..Default::default()
        };
        assert!(top.shifted(1).is_err());
    }
}
