//! Local token service.
//!
//! Runs inside the user's trusted environment: it holds the user's
//! credential-derived grants and hands out wider grants on demand without
//! prompting for the credential again.

use scimcp_core::{GrantVerifier, McpServer, ServerBuilder, ToolDescriptor};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use crate::args::{handler, req_str, to_value};
use crate::clock::SimClock;
use crate::error::ServiceError;

pub const SCOPE_ACTIONS: [&str; 3] = ["read", "write", "admin"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credential {
    pub user_id: String,
    pub secret: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthGrant {
    pub token: String,
    pub user_id: String,
    pub scopes: BTreeSet<String>,
    /// Sim-clock tick at which the grant stops being accepted.
    pub expiry: u64,
}

impl AuthGrant {
    pub fn has_scope(&self, scope: &str) -> bool {
        self.scopes.contains(scope)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuthDecision {
    Allow,
    Deny,
}

/// A user registered with the token service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAccount {
    pub user_id: String,
    pub secret: String,
    /// Scopes this user may be granted. `<service>:*` and `*` are wildcards.
    #[serde(default)]
    pub entitlements: BTreeSet<String>,
}

pub fn validate_scope(scope: &str) -> Result<(), ServiceError> {
    match scope.split_once(':') {
        Some((service, action))
            if scimcp_core::descriptor::is_valid_token(service) && SCOPE_ACTIONS.contains(&action) =>
        {
            Ok(())
        }
        _ => Err(ServiceError::InvalidScope(scope.to_string())),
    }
}

#[derive(Debug)]
pub struct TokenService {
    users: BTreeMap<String, UserAccount>,
    grants: RwLock<HashMap<String, AuthGrant>>,
    clock: Arc<SimClock>,
    ttl_ticks: u64,
    issued: AtomicU64,
}

impl TokenService {
    pub const DEFAULT_TTL: u64 = 10_000;

    pub fn new(users: impl IntoIterator<Item = UserAccount>, clock: Arc<SimClock>, ttl_ticks: u64) -> Self {
        Self {
            users: users.into_iter().map(|u| (u.user_id.clone(), u)).collect(),
            grants: RwLock::new(HashMap::new()),
            clock,
            ttl_ticks: ttl_ticks.max(1),
            issued: AtomicU64::new(0),
        }
    }

    fn entitled(&self, user: &UserAccount, scope: &str) -> bool {
        let service = scope.split(':').next().unwrap_or_default();
        user.entitlements.contains(scope)
            || user.entitlements.contains("*")
            || user.entitlements.contains(&format!("{service}:*"))
    }

    fn issue(&self, user_id: &str, scopes: BTreeSet<String>) -> AuthGrant {
        let n = self.issued.fetch_add(1, Ordering::SeqCst) + 1;
        let mut h = Sha256::new();
        h.update(user_id.as_bytes());
        h.update(n.to_le_bytes());
        for s in &scopes {
            h.update(s.as_bytes());
        }
        let digest = hex::encode(h.finalize());
        let grant = AuthGrant {
            token: format!("tok_{n}_{}", &digest[..16]),
            user_id: user_id.to_string(),
            scopes,
            expiry: self.clock.now() + self.ttl_ticks,
        };
        self.grants
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(grant.token.clone(), grant.clone());
        grant
    }

    fn check_entitled(&self, user: &UserAccount, scopes: &BTreeSet<String>) -> Result<(), ServiceError> {
        for scope in scopes {
            validate_scope(scope)?;
            if !self.entitled(user, scope) {
                return Err(ServiceError::AuthDenied(format!(
                    "user {} is not entitled to {scope}",
                    user.user_id
                )));
            }
        }
        Ok(())
    }

    pub fn acquire(&self, credential: &Credential, scopes: &[String]) -> Result<AuthGrant, ServiceError> {
        let user = self
            .users
            .get(&credential.user_id)
            .filter(|u| u.secret == credential.secret)
            .ok_or_else(|| ServiceError::BadCredential(credential.user_id.clone()))?;
        let scopes: BTreeSet<String> = scopes.iter().cloned().collect();
        self.check_entitled(user, &scopes)?;
        Ok(self.issue(&user.user_id, scopes))
    }

    fn live_grant(&self, token: &str) -> Result<AuthGrant, ServiceError> {
        let grant = self
            .grants
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(token)
            .cloned()
            .ok_or(ServiceError::UnknownGrant)?;
        if self.clock.now() >= grant.expiry {
            return Err(ServiceError::ExpiredGrant);
        }
        Ok(grant)
    }

    /// Pure check: never changes service state.
    pub fn check(&self, token: &str, required_scope: &str) -> Result<AuthDecision, ServiceError> {
        let grant = self.live_grant(token)?;
        Ok(if grant.has_scope(required_scope) {
            AuthDecision::Allow
        } else {
            AuthDecision::Deny
        })
    }

    /// New grant holding every scope of `token` plus `extra_scope`.
    pub fn escalate(&self, token: &str, extra_scope: &str) -> Result<AuthGrant, ServiceError> {
        let grant = self.live_grant(token)?;
        let user = self
            .users
            .get(&grant.user_id)
            .ok_or_else(|| ServiceError::BadCredential(grant.user_id.clone()))?;
        let mut scopes = grant.scopes.clone();
        scopes.insert(extra_scope.to_string());
        self.check_entitled(user, &scopes)?;
        Ok(self.issue(&user.user_id, scopes))
    }

    /// Grants issued so far, by acquire and escalate alike.
    pub fn issued_count(&self) -> u64 {
        self.issued.load(Ordering::SeqCst)
    }

    pub fn grant(&self, token: &str) -> Option<AuthGrant> {
        self.grants
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(token)
            .cloned()
    }
}

impl GrantVerifier for TokenService {
    fn verify(&self, token: Option<&str>, scope: &str) -> Result<(), String> {
        let token = token.ok_or_else(|| "no grant presented".to_string())?;
        match self.check(token, scope) {
            Ok(AuthDecision::Allow) => Ok(()),
            Ok(AuthDecision::Deny) => Err(format!("grant lacks scope {scope}")),
            Err(e) => Err(e.to_string()),
        }
    }
}

/// Grant issuance over the protocol, for clients outside the process that
/// hosts the token service. The server itself needs no grant.
pub fn server(auth: Arc<TokenService>) -> ServerBuilder {
    let a = auth.clone();
    let acquire = ToolDescriptor::new(
        "acquire_grant",
        "Exchange a user credential for a grant carrying the requested scopes.",
    )
    .with_input_schema(json!({
        "type": "object",
        "properties": {
            "user_id": {"type": "string"},
            "secret": {"type": "string"},
            "scopes": {"type": "array", "items": {"type": "string"}}
        },
        "required": ["user_id", "secret", "scopes"],
        "additionalProperties": false
    }));
    let escalate = ToolDescriptor::new(
        "escalate_grant",
        "Widen a live grant by one scope the user is entitled to.",
    )
    .with_input_schema(json!({
        "type": "object",
        "properties": {"token": {"type": "string"}, "scope": {"type": "string"}},
        "required": ["token", "scope"],
        "additionalProperties": false
    }));
    McpServer::builder("auth")
        .instructions("Obtain grants for the other servers of this deployment.")
        .tool(
            acquire,
            handler(move |_, args| {
                let cred = Credential {
                    user_id: req_str(args, "user_id")?.to_string(),
                    secret: req_str(args, "secret")?.to_string(),
                };
                let scopes: Vec<String> = args["scopes"]
                    .as_array()
                    .map(|v| v.iter().filter_map(Value::as_str).map(String::from).collect())
                    .unwrap_or_default();
                Ok(to_value(&a.acquire(&cred, &scopes)?))
            }),
        )
        .tool(
            escalate,
            handler(move |_, args| {
                Ok(to_value(
                    &auth.escalate(req_str(args, "token")?, req_str(args, "scope")?)?,
                ))
            }),
        )
}
