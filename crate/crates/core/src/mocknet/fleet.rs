use std::net::{Ipv4Addr, SocketAddrV4};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::certgen::MockCertSpec;
use super::ros_master::{
    spawn_echo, spawn_faulting_xmlrpc, spawn_plain_http, RosGraph, RosMasterMock,
};
use super::router::{RouterAuth, RouterConfig, RouterMock};
use super::server::{closed_port, MockServer};
use super::sros_node::{SrosNodeConfig, SrosNodeMock};
use crate::engine::{AdapterKind, Finding, Payload};
use crate::ros::{classify_system, RosSystemState, SystemNature, DEFAULT_SIMULATION_MARKERS};
use crate::routers::{Credential, CredentialBook, Security, Vendor};
use crate::sros::{detect_demo_ca, HarvestedCertificate};

const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphPreset {
    Empty,
    RosoutOnly,
    TalkerListener,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    Preset(GraphPreset),
    Custom(RosGraph),
}

impl Default for GraphSpec {
    fn default() -> Self {
        GraphSpec::Preset(GraphPreset::RosoutOnly)
    }
}

impl GraphSpec {
    pub fn graph(&self) -> RosGraph {
        match self {
            GraphSpec::Preset(GraphPreset::Empty) => RosGraph::default(),
            GraphSpec::Preset(GraphPreset::RosoutOnly) => RosGraph::rosout_only(),
            GraphSpec::Preset(GraphPreset::TalkerListener) => RosGraph::talker_listener(),
            GraphSpec::Custom(g) => g.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertPreset {
    DemoMaster,
    DemoTalker,
    OrgMaster,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CertSpec {
    Preset(CertPreset),
    Custom(MockCertSpec),
}

impl CertSpec {
    pub fn spec(&self) -> MockCertSpec {
        match self {
            CertSpec::Preset(CertPreset::DemoMaster) => MockCertSpec::demo("master", Vec::new()),
            CertSpec::Preset(CertPreset::DemoTalker) => MockCertSpec::demo_talker(),
            CertSpec::Preset(CertPreset::OrgMaster) => {
                MockCertSpec::organisation("master", "Acme Robotics", Vec::new())
            }
            CertSpec::Custom(c) => c.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoyKind {
    /// Nothing listens.
    Closed,
    PlainHttp,
    /// XML-RPC server without the ROS master API.
    FaultingXmlrpc,
    Echo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HostKind {
    RosMaster {
        #[serde(default)]
        graph: GraphSpec,
    },
    SrosNode {
        cert: CertSpec,
        #[serde(default = "one")]
        chain_len: usize,
        #[serde(default = "yes")]
        request_client_cert: bool,
    },
    Router(RouterConfig),
    Decoy {
        decoy: DecoyKind,
        /// Adapter this decoy is meant to fool.
        #[serde(default = "ros")]
        against: AdapterKind,
    },
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn ros() -> AdapterKind {
    AdapterKind::Ros
}

fn loopback() -> Ipv4Addr {
    Ipv4Addr::LOCALHOST
}

impl HostKind {
    /// The adapter whose scan this host is part of.
    pub fn adapter(&self) -> AdapterKind {
        match self {
            HostKind::RosMaster { .. } => AdapterKind::Ros,
            HostKind::SrosNode { .. } => AdapterKind::Sros,
            HostKind::Router(_) => AdapterKind::IRouters,
            HostKind::Decoy { against, .. } => *against,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestHost {
    #[serde(default = "loopback")]
    pub address: Ipv4Addr,
    /// 0 picks a free port.
    #[serde(default)]
    pub port: u16,
    #[serde(flatten)]
    pub kind: HostKind,
}

impl ManifestHost {
    pub fn new(kind: HostKind) -> Self {
        Self {
            address: loopback(),
            port: 0,
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FleetManifest {
    pub version: u32,
    #[serde(default, rename = "host")]
    pub hosts: Vec<ManifestHost>,
}

impl Default for FleetManifest {
    fn default() -> Self {
        Self {
            version: MANIFEST_VERSION,
            hosts: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum FleetError {
    #[error("cannot read manifest {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad manifest: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported manifest version {0}")]
    Version(u32),
    #[error("host {index} ({address}:{port}) failed to start: {source}")]
    Spawn {
        index: usize,
        address: Ipv4Addr,
        port: u16,
        #[source]
        source: std::io::Error,
    },
}

impl FleetManifest {
    pub fn parse(text: &str) -> Result<Self, FleetError> {
        let manifest: Self = toml::from_str(text)?;
        if manifest.version != MANIFEST_VERSION {
            return Err(FleetError::Version(manifest.version));
        }
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self, FleetError> {
        let text = std::fs::read_to_string(path).map_err(|source| FleetError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn push(mut self, kind: HostKind) -> Self {
        self.hosts.push(ManifestHost::new(kind));
        self
    }

    /// `total` routers cycling through every console type, of which the
    /// first `with_defaults` keep a factory login from `book` and the rest
    /// use a changed password.
    pub fn routers(total: usize, with_defaults: usize, book: &CredentialBook) -> Self {
        let mut m = Self::default();
        for i in 0..total {
            let vendor = Vendor::ALL[i % Vendor::ALL.len()];
            let auth = if i < with_defaults {
                let c = book
                    .for_vendor(vendor)
                    .into_iter()
                    .next()
                    .unwrap_or_else(|| Credential::new("admin", ""));
                RouterAuth::credentials(&c.username, &c.password)
            } else {
                RouterAuth::credentials("admin", &format!("changed-{i}-x7Q"))
            };
            m = m.push(HostKind::Router(RouterConfig { vendor, auth }));
        }
        m
    }
}

pub enum HostHandle {
    RosMaster(RosMasterMock),
    SrosNode(SrosNodeMock),
    Router(RouterMock),
    Server(MockServer),
    Closed,
}

pub struct RunningHost {
    pub spec: ManifestHost,
    pub addr: SocketAddrV4,
    pub handle: HostHandle,
}

/// Every host of a manifest, live until dropped.
pub struct Fleet {
    pub hosts: Vec<RunningHost>,
}

fn spawn_host(host: &ManifestHost) -> std::io::Result<(SocketAddrV4, HostHandle)> {
    let bind = SocketAddrV4::new(host.address, host.port);
    Ok(match &host.kind {
        HostKind::RosMaster { graph } => {
            let m = RosMasterMock::spawn(bind, graph.graph())?;
            (m.addr(), HostHandle::RosMaster(m))
        }
        HostKind::SrosNode {
            cert,
            chain_len,
            request_client_cert,
        } => {
            let config = SrosNodeConfig {
                cert: cert.spec(),
                chain_len: *chain_len,
                request_client_cert: *request_client_cert,
                tls13: false,
            };
            let m = SrosNodeMock::spawn(bind, config)?;
            (m.addr(), HostHandle::SrosNode(m))
        }
        HostKind::Router(config) => {
            let m = RouterMock::spawn(bind, config.clone())?;
            (m.addr(), HostHandle::Router(m))
        }
        HostKind::Decoy { decoy, .. } => {
            let server = match decoy {
                DecoyKind::Closed => {
                    let addr = if host.port == 0 { closed_port()? } else { bind };
                    return Ok((addr, HostHandle::Closed));
                }
                DecoyKind::PlainHttp => spawn_plain_http(bind)?,
                DecoyKind::FaultingXmlrpc => spawn_faulting_xmlrpc(bind)?,
                DecoyKind::Echo => spawn_echo(bind)?,
            };
            (server.addr(), HostHandle::Server(server))
        }
    })
}

/// Starts every host. If any fails, the ones already started are torn down.
pub fn spawn_fleet(manifest: &FleetManifest) -> Result<Fleet, FleetError> {
    let mut hosts = Vec::with_capacity(manifest.hosts.len());
    for (index, spec) in manifest.hosts.iter().enumerate() {
        match spawn_host(spec) {
            Ok((addr, handle)) => hosts.push(RunningHost {
                spec: spec.clone(),
                addr,
                handle,
            }),
            Err(source) => {
                drop(hosts);
                return Err(FleetError::Spawn {
                    index,
                    address: spec.address,
                    port: spec.port,
                    source,
                });
            }
        }
    }
    Ok(Fleet { hosts })
}

/// The comparable part of a finding: no timestamps, no raw bytes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    RosHost {
        nature: Option<SystemNature>,
        #[serde(skip_serializing_if = "Option::is_none")]
        graph: Option<String>,
    },
    SrosHost {
        node_name: String,
        demo_ca: bool,
        policies: usize,
    },
    Router {
        vendor: Vendor,
        security: Security,
        open_access: bool,
        credentials: Option<String>,
    },
    Negative {
        verdict: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Expectation {
    pub target: SocketAddrV4,
    pub adapter: AdapterKind,
    #[serde(flatten)]
    pub outcome: Outcome,
}

fn graph_key(state: &RosSystemState) -> String {
    serde_json::to_string(state).unwrap_or_default()
}

/// Reduces a scanner finding to the shape the oracle predicts.
pub fn project(finding: &Finding) -> Expectation {
    let outcome = match &finding.payload {
        Payload::Ros(h) => Outcome::RosHost {
            nature: h.nature,
            graph: h.state.as_ref().map(graph_key),
        },
        Payload::Sros(h) => Outcome::SrosHost {
            node_name: h.master.node_name.clone(),
            demo_ca: h.master.demo_ca,
            policies: h.master.policies.len(),
        },
        Payload::Router(r) => Outcome::Router {
            vendor: r.model.vendor,
            security: r.security,
            open_access: r.open_access,
            credentials: r
                .winning_credentials
                .as_ref()
                .map(|c| format!("{}:{}", c.username, c.password)),
        },
        Payload::Negative(n) => Outcome::Negative {
            verdict: n.verdict.clone(),
        },
    };
    Expectation {
        target: finding.target,
        adapter: finding.adapter,
        outcome,
    }
}

/// Verdict a decoy earns from each adapter.
pub fn decoy_verdict(decoy: DecoyKind, adapter: AdapterKind) -> &'static str {
    match (decoy, adapter) {
        (DecoyKind::Closed, _) => "unreachable",
        (DecoyKind::FaultingXmlrpc, AdapterKind::Ros) => "xmlrpc_not_ros",
        (DecoyKind::PlainHttp | DecoyKind::Echo, AdapterKind::Ros) => "malformed",
        (DecoyKind::PlainHttp | DecoyKind::FaultingXmlrpc, AdapterKind::Sros) => "not_tls",
        (DecoyKind::Echo, AdapterKind::Sros) => "protocol_error",
        (DecoyKind::PlainHttp | DecoyKind::FaultingXmlrpc, AdapterKind::IRouters) => "not_router",
        (DecoyKind::Echo, AdapterKind::IRouters) => "not_http",
    }
}

/// What a router scan with `book` should conclude about `config`.
pub fn expected_router(config: &RouterConfig, book: &CredentialBook) -> Outcome {
    let vendor = config.vendor;
    let candidates = book.for_vendor(vendor);
    let (open_access, winner) = match &config.auth {
        RouterAuth::Open if vendor == Vendor::SierraWireless => {
            (false, candidates.first().cloned())
        }
        RouterAuth::Open => (true, None),
        RouterAuth::Credentials { username, password } => (
            false,
            candidates
                .iter()
                .find(|c| {
                    &c.password == password && (vendor == Vendor::MoxaV1 || &c.username == username)
                })
                .cloned(),
        ),
    };
    Outcome::Router {
        vendor,
        security: if open_access || winner.is_some() {
            Security::NotSecure
        } else {
            Security::Secure
        },
        open_access,
        credentials: winner.map(|c| format!("{}:{}", c.username, c.password)),
    }
}

impl Fleet {
    pub fn addrs(&self, adapter: AdapterKind) -> Vec<SocketAddrV4> {
        self.hosts
            .iter()
            .filter(|h| h.spec.kind.adapter() == adapter)
            .map(|h| h.addr)
            .collect()
    }

    pub fn all_addrs(&self) -> Vec<SocketAddrV4> {
        self.hosts.iter().map(|h| h.addr).collect()
    }

    /// Findings a scan of this fleet must produce, sorted. Each host is
    /// predicted under its own adapter; SROS predictions cover the master
    /// identity only.
    pub fn expected_findings(&self, extended: bool, book: &CredentialBook) -> Vec<Expectation> {
        let markers: Vec<&str> = DEFAULT_SIMULATION_MARKERS.to_vec();
        let mut out: Vec<Expectation> = self
            .hosts
            .iter()
            .map(|h| {
                let outcome = match &h.spec.kind {
                    HostKind::RosMaster { graph } => {
                        let state = graph.graph().expected_state();
                        if extended {
                            Outcome::RosHost {
                                nature: Some(classify_system(&state, &markers)),
                                graph: Some(graph_key(&state)),
                            }
                        } else {
                            Outcome::RosHost {
                                nature: None,
                                graph: None,
                            }
                        }
                    }
                    HostKind::SrosNode { cert, .. } => {
                        let spec = cert.spec();
                        let cert = HarvestedCertificate {
                            subject: spec.subject.clone(),
                            issuer: spec.issuer.clone(),
                            policies_raw: Vec::new(),
                            der: Vec::new(),
                            chain_len: 1,
                            client_cert_requested: true,
                        };
                        Outcome::SrosHost {
                            node_name: cert.subject_attr("CN").unwrap_or_default().to_string(),
                            demo_ca: detect_demo_ca(&cert),
                            policies: 0,
                        }
                    }
                    HostKind::Router(config) => expected_router(config, book),
                    HostKind::Decoy { decoy, against } => Outcome::Negative {
                        verdict: decoy_verdict(*decoy, *against).to_string(),
                    },
                };
                Expectation {
                    target: h.addr,
                    adapter: h.spec.kind.adapter(),
                    outcome,
                }
            })
            .collect();
        out.sort();
        out
    }

    pub fn router_log(&self, addr: SocketAddrV4) -> Option<&RouterMock> {
        self.hosts
            .iter()
            .find(|h| h.addr == addr)
            .and_then(|h| match &h.handle {
                HostHandle::Router(r) => Some(r),
                _ => None,
            })
    }

    pub fn teardown(self) {
        drop(self);
    }
}
