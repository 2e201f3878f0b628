//! Industrial-router console identification and factory-credential audit.
//!
//! A probe grabs the headers of `GET /`, matches them against the vendor
//! signatures, checks whether the console is reachable without a login and
//! otherwise tries the vendor's factory credentials one at a time, stopping
//! at the first that works.

mod credentials;
mod identify;
mod login;

use std::net::SocketAddrV4;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::engine::{Adapter, AdapterKind, NegativeProbe, Payload, ProbeContext};
use crate::enrichment::{EnrichmentRecord, WhoisLookup};
use crate::proto::http::{self, Request};

pub use credentials::{Credential, CredentialBook, CredentialFileError};
pub use identify::{identify_router, RouterModel, Vendor};
pub use login::{
    extract_challenge, md5_hex, sierra_login_body, AttemptOutcome, CredentialAttempt, MoxaMarkers,
    EWON_PATH, MOXA_V1_LOGIN_PATH, SIERRA_LOGIN_PATH, WESTERMO_PATH,
};

/// Default pause between two login attempts against the same host.
pub const DEFAULT_ATTEMPT_DELAY: Duration = Duration::from_secs(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Security {
    Secure,
    NotSecure,
}

impl Security {
    pub fn as_str(self) -> &'static str {
        match self {
            Security::Secure => "secure",
            Security::NotSecure => "not_secure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouterFinding {
    pub model: RouterModel,
    pub security: Security,
    pub winning_credentials: Option<Credential>,
    pub open_access: bool,
    pub attempts: Vec<CredentialAttempt>,
    #[serde(default)]
    pub enrichment: Option<EnrichmentRecord>,
}

/// Not secure when the console is open or any login went through.
/// Indeterminate attempts count for nothing.
pub fn classify_security(attempts: &[CredentialAttempt], open_access: bool) -> Security {
    if open_access
        || attempts
            .iter()
            .any(|a| a.outcome == AttemptOutcome::Accepted)
    {
        Security::NotSecure
    } else {
        Security::Secure
    }
}

#[derive(Debug, Clone)]
pub struct LoginConfig {
    pub timeout: Duration,
    pub attempt_delay: Duration,
    pub markers: MoxaMarkers,
}

impl Default for LoginConfig {
    fn default() -> Self {
        Self {
            timeout: crate::engine::DEFAULT_TIMEOUT,
            attempt_delay: DEFAULT_ATTEMPT_DELAY,
            markers: MoxaMarkers::default(),
        }
    }
}

/// Runs the vendor's login flow once per credential, in order, until one is
/// accepted.
pub fn check_default_credentials(
    target: SocketAddrV4,
    model: &RouterModel,
    credentials: &[Credential],
    config: &LoginConfig,
) -> Vec<CredentialAttempt> {
    let session = login::Session {
        target,
        timeout: config.timeout,
        markers: &config.markers,
    };
    let mut attempts = Vec::new();
    for (i, cred) in credentials.iter().enumerate() {
        if i > 0 && !config.attempt_delay.is_zero() {
            std::thread::sleep(config.attempt_delay);
        }
        let outcome = session.attempt(model.vendor, cred);
        attempts.push(CredentialAttempt {
            username: cred.username.clone(),
            password: cred.password.clone(),
            outcome,
        });
        if outcome == AttemptOutcome::Accepted {
            break;
        }
    }
    attempts
}

/// Engine adapter for `-t IROUTERS`.
#[derive(Clone)]
pub struct RouterAdapter {
    pub credentials: CredentialBook,
    pub attempt_delay: Duration,
    pub markers: MoxaMarkers,
    pub whois: Option<Arc<dyn WhoisLookup>>,
}

impl Default for RouterAdapter {
    fn default() -> Self {
        Self {
            credentials: CredentialBook::bundled(),
            attempt_delay: DEFAULT_ATTEMPT_DELAY,
            markers: MoxaMarkers::default(),
            whois: None,
        }
    }
}

impl RouterAdapter {
    pub fn with_attempt_delay(mut self, delay: Duration) -> Self {
        self.attempt_delay = delay;
        self
    }

    pub fn with_whois(mut self, whois: Arc<dyn WhoisLookup>) -> Self {
        self.whois = Some(whois);
        self
    }

    pub fn with_credentials(mut self, credentials: CredentialBook) -> Self {
        self.credentials = credentials;
        self
    }
}

impl Adapter for RouterAdapter {
    fn kind(&self) -> AdapterKind {
        AdapterKind::IRouters
    }

    fn probe(&self, target: SocketAddrV4, ctx: &ProbeContext) -> Payload {
        let resp = match http::send(target, &Request::get("/"), ctx.timeout()) {
            Ok(r) => r,
            Err(e) if e.is_unreachable() => {
                return Payload::Negative(NegativeProbe::new("unreachable", e.to_string()))
            }
            Err(e) => return Payload::Negative(NegativeProbe::new("not_http", e.to_string())),
        };
        let Some(model) = identify_router(&resp.headers) else {
            let server = resp.header_value("Server").unwrap_or("-");
            return Payload::Negative(NegativeProbe::new(
                "not_router",
                format!(
                    "no router signature (HTTP {}, Server: {server})",
                    resp.status
                ),
            ));
        };
        let config = LoginConfig {
            timeout: ctx.timeout(),
            attempt_delay: self.attempt_delay,
            markers: self.markers.clone(),
        };
        let session = login::Session {
            target,
            timeout: config.timeout,
            markers: &config.markers,
        };
        let open_access = session.open_access(model.vendor).unwrap_or(false);
        let attempts = if open_access {
            Vec::new()
        } else {
            check_default_credentials(
                target,
                &model,
                &self.credentials.for_vendor(model.vendor),
                &config,
            )
        };
        let winning_credentials = attempts
            .iter()
            .find(|a| a.outcome == AttemptOutcome::Accepted)
            .map(|a| Credential::new(&a.username, &a.password));
        Payload::Router(RouterFinding {
            security: classify_security(&attempts, open_access),
            model,
            winning_credentials,
            open_access,
            attempts,
            enrichment: self.whois.as_ref().map(|w| w.lookup(*target.ip())),
        })
    }
}
