use std::net::SocketAddrV4;

use serde::{Deserialize, Serialize};

use super::cert::{format_name, HarvestedCertificate, NameAttributes};
use super::harvest::{harvest_certificate, HarvestError};
use super::policy::{parse_policies_with, PermissionConvention, SrosPolicy};
use crate::engine::{PortSet, ProbeContext};

/// Issuer attributes of the certificate authority bundled with the SROS
/// demo setup, misspelt state field included.
pub const DEMO_CA_SIGNATURE: [(&str, &str); 5] = [
    ("C", "ZZ"),
    ("ST", "Sate"),
    ("L", "Locality"),
    ("O", "Organization"),
    ("OU", "Organizational Unit"),
];

pub fn detect_demo_ca(cert: &HarvestedCertificate) -> bool {
    DEMO_CA_SIGNATURE
        .iter()
        .all(|(k, v)| cert.issuer.iter().any(|(ik, iv)| ik == k && iv == v))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrosNodeIdentity {
    pub target: SocketAddrV4,
    /// Subject common name.
    pub node_name: String,
    pub demo_ca: bool,
    pub policies: Vec<SrosPolicy>,
    pub subject: NameAttributes,
    pub issuer: NameAttributes,
    pub chain_len: usize,
    pub client_cert_requested: bool,
}

impl SrosNodeIdentity {
    pub fn from_certificate(
        target: SocketAddrV4,
        cert: &HarvestedCertificate,
        policies: Vec<SrosPolicy>,
    ) -> Self {
        Self {
            target,
            node_name: cert.subject_attr("CN").unwrap_or_default().to_string(),
            demo_ca: detect_demo_ca(cert),
            policies,
            subject: cert.subject.clone(),
            issuer: cert.issuer.clone(),
            chain_len: cert.chain_len,
            client_cert_requested: cert.client_cert_requested,
        }
    }

    pub fn describe(&self) -> String {
        let mut out = format!(
            "\tNode name: {}\n\tPort: {}\n\tDemo CA Used: {}\n\tSubject: {}\n\tIssuer: {}\n",
            self.node_name,
            self.target.port(),
            if self.demo_ca { "True" } else { "False" },
            format_name(&self.subject),
            format_name(&self.issuer),
        );
        for p in &self.policies {
            out.push_str(&format!(
                "\t\tPolicy: {}\n\t\tType: {}\n\t\tPermission: {}\n",
                p.oid,
                p.kind.label(),
                if p.permission { "True" } else { "False" }
            ));
            for v in &p.values {
                out.push_str(&format!("\t\t\tValue: {}\n", String::from_utf8_lossy(v)));
            }
        }
        out
    }
}

/// Identity of the master. Its certificate carries no policies, so none are
/// decoded.
pub fn probe_sros_master(
    target: SocketAddrV4,
    timeout: std::time::Duration,
) -> Result<SrosNodeIdentity, HarvestError> {
    let cert = harvest_certificate(target, timeout)?;
    Ok(SrosNodeIdentity::from_certificate(
        target,
        &cert,
        Vec::new(),
    ))
}

/// Outcome for one port of an extended sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrosPortResult {
    pub port: u16,
    pub identity: Option<SrosNodeIdentity>,
    pub error: Option<String>,
}

/// Harvests every port of `host` under the context's bounds. Ports that
/// refuse the connection are left out; other failures are kept with no
/// identity.
pub fn extended_sros_scan(
    host: std::net::Ipv4Addr,
    ports: &PortSet,
    convention: &PermissionConvention,
    ctx: &ProbeContext,
) -> Vec<SrosPortResult> {
    let timeout = ctx.timeout();
    ctx.sweep(ports.ports(), |&port| {
        let target = SocketAddrV4::new(host, port);
        match harvest_certificate(target, timeout) {
            Ok(cert) => {
                let policies = parse_policies_with(&cert, convention).policies;
                Some(SrosPortResult {
                    port,
                    identity: Some(SrosNodeIdentity::from_certificate(target, &cert, policies)),
                    error: None,
                })
            }
            Err(e) if e.is_refused() => None,
            Err(e) => Some(SrosPortResult {
                port,
                identity: None,
                error: Some(format!("{}: {e}", e.verdict())),
            }),
        }
    })
    .into_iter()
    .flatten()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_issuer(issuer: &[(&str, &str)]) -> HarvestedCertificate {
        HarvestedCertificate {
            subject: vec![("CN".into(), "master".into())],
            issuer: issuer
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            policies_raw: vec![],
            der: vec![],
            chain_len: 1,
            client_cert_requested: false,
        }
    }

    #[test]
    fn demo_issuer_detected() {
        let mut issuer = DEMO_CA_SIGNATURE.to_vec();
        issuer.push(("CN", "master"));
        assert!(detect_demo_ca(&with_issuer(&issuer)));
    }

    #[test]
    fn public_ca_is_not_demo() {
        let cert = with_issuer(&[
            ("C", "US"),
            ("O", "Google Trust Services"),
            ("CN", "Google Internet Authority G3"),
        ]);
        assert!(!detect_demo_ca(&cert));
        assert!(!detect_demo_ca(&with_issuer(&[])));
    }

    #[test]
    fn any_single_mutation_flips_detection() {
        for i in 0..DEMO_CA_SIGNATURE.len() {
            let mut issuer = DEMO_CA_SIGNATURE.to_vec();
            issuer[i].1 = "State";
            assert!(!detect_demo_ca(&with_issuer(&issuer)), "attribute {i}");
            let mut dropped = DEMO_CA_SIGNATURE.to_vec();
            dropped.remove(i);
            assert!(!detect_demo_ca(&with_issuer(&dropped)));
        }
    }
}
