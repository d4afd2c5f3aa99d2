//! In-process stand-ins for transfer, compute, search, facility status and
//! event-streaming services, each bound to its own MCP server, plus the local
//! token service that authorizes calls against them.
//!
//! All time is simulated: backends read a shared [`SimClock`] so task
//! lifecycles advance deterministically.

pub mod auth;
pub mod clock;
pub mod compute;
pub mod deployment;
pub mod error;
pub mod events;
pub mod fixture;
pub mod search;
pub mod status;
pub mod transfer;
pub mod vfs;

mod args;

pub use auth::{AuthDecision, AuthGrant, Credential, TokenService};
pub use clock::{ClockMode, SimClock};
pub use deployment::Deployment;
pub use error::ServiceError;
pub use fixture::Fixture;
