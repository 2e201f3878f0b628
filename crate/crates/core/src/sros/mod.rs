//! SROS node identification: grab the server certificate from a TLS
//! handshake that is abandoned before the client has to authenticate, then
//! decode the permission policies embedded in it.
//!
//! An extended scan sweeps every port of the host by default. Only do that
//! against a handful of hosts.

mod bytes;
mod cert;
mod harvest;
mod identity;
mod policy;

use std::net::SocketAddrV4;

use serde::{Deserialize, Serialize};

use crate::engine::{Adapter, AdapterKind, NegativeProbe, Payload, PortSet, ProbeContext};

pub use cert::{format_name, CertError, HarvestedCertificate, NameAttributes, RawPolicy};
pub use harvest::{harvest_certificate, HarvestError};
pub use identity::{
    detect_demo_ca, extended_sros_scan, probe_sros_master, SrosNodeIdentity, SrosPortResult,
    DEMO_CA_SIGNATURE,
};
pub use policy::{
    parse_policies, parse_policies_with, PermissionConvention, PolicyKind, PolicyParse, SrosPolicy,
    SROS_POLICY_PREFIX,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrosHost {
    pub master: SrosNodeIdentity,
    /// Per-port results of the extended sweep; empty in basic mode.
    pub nodes: Vec<SrosPortResult>,
}

/// Engine adapter for `-t SROS`.
#[derive(Debug, Clone)]
pub struct SrosAdapter {
    pub convention: PermissionConvention,
    pub extended_ports: PortSet,
}

impl Default for SrosAdapter {
    fn default() -> Self {
        Self {
            convention: PermissionConvention::default(),
            extended_ports: PortSet::all(),
        }
    }
}

impl Adapter for SrosAdapter {
    fn kind(&self) -> AdapterKind {
        AdapterKind::Sros
    }

    fn probe(&self, target: SocketAddrV4, ctx: &ProbeContext) -> Payload {
        let master = match probe_sros_master(target, ctx.timeout()) {
            Ok(m) => m,
            Err(e) => return Payload::Negative(NegativeProbe::new(e.verdict(), e.to_string())),
        };
        let nodes = if ctx.extended() {
            extended_sros_scan(*target.ip(), &self.extended_ports, &self.convention, ctx)
        } else {
            Vec::new()
        };
        Payload::Sros(SrosHost { master, nodes })
    }
}
