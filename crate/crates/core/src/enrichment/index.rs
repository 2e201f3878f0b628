use std::collections::BTreeMap;
use std::net::{Ipv4Addr, SocketAddrV4};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Deserialize;
use thiserror::Error;

use crate::routers::Vendor;

/// Environment variable holding the live provider's API key.
pub const API_KEY_VAR: &str = "SHODAN_API_KEY";
pub const DEFAULT_BASE_URL: &str = "https://api.shodan.io";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexQuery {
    pub vendor: Vendor,
    pub query_string: String,
}

impl IndexQuery {
    /// Banner search built from the same header signature the router
    /// identification matches on. These are reconstructions, not queries
    /// known to have been used elsewhere.
    pub fn for_vendor(vendor: Vendor) -> Self {
        let query_string = match vendor {
            Vendor::Westermo => "\"WWW-Authenticate: Basic realm=\\\"Westermo\"",
            Vendor::Ewon => "\"Server: eWON\"",
            Vendor::MoxaV1 => "\"Server: MoxaHttp/1.0\"",
            Vendor::MoxaV2 => "\"Server: MoxaHttp/2.2\"",
            Vendor::SierraWireless => "\"ACEmanager\"",
        };
        Self {
            vendor,
            query_string: query_string.to_string(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("no API key: set {0}")]
    MissingKey(&'static str),
    #[error("provider rejected the API key")]
    Auth,
    #[error("provider quota or rate limit exhausted")]
    Quota,
    #[error("provider error: {0}")]
    Other(String),
}

/// Internet-index search for candidate targets.
pub trait IndexProvider: Send + Sync {
    fn search(&self, query: &IndexQuery, limit: usize) -> Result<Vec<SocketAddrV4>, ProviderError>;
}

pub fn query_index(
    provider: &dyn IndexProvider,
    query: &IndexQuery,
    limit: usize,
) -> Result<Vec<SocketAddrV4>, ProviderError> {
    let mut out = provider.search(query, limit)?;
    out.truncate(limit);
    Ok(out)
}

/// Canned results per vendor, for tests and offline demos.
#[derive(Debug, Clone, Default)]
pub struct MockIndexProvider {
    seeded: BTreeMap<Vendor, Vec<SocketAddrV4>>,
    failure: Option<ProviderError>,
}

impl MockIndexProvider {
    pub fn seed(mut self, vendor: Vendor, targets: impl IntoIterator<Item = SocketAddrV4>) -> Self {
        self.seeded.entry(vendor).or_default().extend(targets);
        self
    }

    /// Every search fails with `err`.
    pub fn failing(err: ProviderError) -> Self {
        Self {
            seeded: BTreeMap::new(),
            failure: Some(err),
        }
    }
}

impl IndexProvider for MockIndexProvider {
    fn search(&self, query: &IndexQuery, limit: usize) -> Result<Vec<SocketAddrV4>, ProviderError> {
        if let Some(err) = &self.failure {
            return Err(err.clone());
        }
        Ok(self
            .seeded
            .get(&query.vendor)
            .map(|v| v.iter().take(limit).copied().collect())
            .unwrap_or_default())
    }
}

/// Shodan host-search client. At most one request per second.
pub struct ShodanProvider {
    key: Option<String>,
    base_url: String,
    agent: ureq::Agent,
    last_request: Mutex<Option<Instant>>,
}

const PAGE_SIZE: usize = 100;
const MIN_INTERVAL: Duration = Duration::from_secs(1);

#[derive(Deserialize)]
struct SearchPage {
    #[serde(default)]
    matches: Vec<Match>,
}

#[derive(Deserialize)]
struct Match {
    ip_str: String,
    port: u16,
}

impl ShodanProvider {
    /// Reads the key from the environment; a missing key only fails once a
    /// search is attempted.
    pub fn from_env() -> Self {
        Self::new(std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty()))
    }

    pub fn new(key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            key,
            base_url: DEFAULT_BASE_URL.into(),
            agent,
            last_request: Mutex::new(None),
        }
    }

    pub fn with_base_url(mut self, url: &str) -> Self {
        self.base_url = url.trim_end_matches('/').to_string();
        self
    }

    fn pace(&self) {
        let mut last = self.last_request.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = *last {
            let elapsed = t.elapsed();
            if elapsed < MIN_INTERVAL {
                std::thread::sleep(MIN_INTERVAL - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn page(&self, key: &str, query: &str, page: usize) -> Result<Vec<Match>, ProviderError> {
        self.pace();
        let mut resp = self
            .agent
            .get(&format!("{}/shodan/host/search", self.base_url))
            .query("key", key)
            .query("query", query)
            .query("page", page.to_string())
            .call()
            .map_err(|e| ProviderError::Other(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::Other(e.to_string()))?;
        match status {
            200 => serde_json::from_str::<SearchPage>(&body)
                .map(|p| p.matches)
                .map_err(|e| ProviderError::Other(format!("bad search reply: {e}"))),
            401 | 403 => Err(ProviderError::Auth),
            402 | 429 => Err(ProviderError::Quota),
            s => Err(ProviderError::Other(format!("HTTP {s}"))),
        }
    }
}

impl IndexProvider for ShodanProvider {
    fn search(&self, query: &IndexQuery, limit: usize) -> Result<Vec<SocketAddrV4>, ProviderError> {
        let key = self
            .key
            .as_deref()
            .ok_or(ProviderError::MissingKey(API_KEY_VAR))?;
        let mut out = Vec::new();
        let mut page = 1;
        while out.len() < limit {
            let matches = self.page(key, &query.query_string, page)?;
            let n = matches.len();
            out.extend(matches.into_iter().filter_map(|m| {
                m.ip_str
                    .parse::<Ipv4Addr>()
                    .ok()
                    .map(|ip| SocketAddrV4::new(ip, m.port))
            }));
            if n < PAGE_SIZE {
                break;
            }
            page += 1;
        }
        out.truncate(limit);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moxa_targets() -> Vec<SocketAddrV4> {
        (1..=5)
            .map(|i| SocketAddrV4::new(Ipv4Addr::new(192, 0, 2, i), 80))
            .collect()
    }

    #[test]
    fn mock_passthrough_and_limit() {
        let provider = MockIndexProvider::default().seed(Vendor::MoxaV2, moxa_targets());
        let q = IndexQuery::for_vendor(Vendor::MoxaV2);
        assert_eq!(query_index(&provider, &q, 10).unwrap(), moxa_targets());
        assert_eq!(query_index(&provider, &q, 2).unwrap(), moxa_targets()[..2]);
        assert!(
            query_index(&provider, &IndexQuery::for_vendor(Vendor::Ewon), 10)
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn missing_key_fails_without_network() {
        let provider = ShodanProvider::new(None).with_base_url("http://192.0.2.1:9");
        let err = query_index(&provider, &IndexQuery::for_vendor(Vendor::Ewon), 5).unwrap_err();
        assert_eq!(err, ProviderError::MissingKey(API_KEY_VAR));
    }

    #[test]
    fn queries_follow_signatures() {
        for v in Vendor::ALL {
            let q = IndexQuery::for_vendor(v);
            assert_eq!(q.vendor, v);
            assert!(!q.query_string.is_empty());
        }
        assert!(IndexQuery::for_vendor(Vendor::MoxaV1)
            .query_string
            .contains("MoxaHttp/1.0"));
    }
}
