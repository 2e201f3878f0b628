//! Minimal x509 v3 certificates for the SROS mock nodes. Keys and
//! signatures are placeholder bytes; only the structure is real.

use serde::{Deserialize, Serialize};

use crate::proto::der;
use crate::sros::{NameAttributes, PermissionConvention, SrosPolicy, DEMO_CA_SIGNATURE};

const OID_ED25519: [u64; 4] = [1, 3, 101, 112];
const OID_CERT_POLICIES: [u64; 4] = [2, 5, 29, 32];
const OID_QT_CPS: [u64; 9] = [1, 3, 6, 1, 5, 5, 7, 2, 1];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockCertSpec {
    pub subject: NameAttributes,
    pub issuer: NameAttributes,
    #[serde(default)]
    pub policies: Vec<SrosPolicy>,
}

fn attrs(pairs: &[(&str, &str)]) -> NameAttributes {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

impl MockCertSpec {
    /// A node certificate from the SROS demo CA.
    pub fn demo(node_name: &str, policies: Vec<SrosPolicy>) -> Self {
        let mut subject = attrs(&DEMO_CA_SIGNATURE);
        subject.push(("CN".into(), node_name.into()));
        let mut issuer = attrs(&DEMO_CA_SIGNATURE);
        issuer.push(("CN".into(), "master".into()));
        Self {
            subject,
            issuer,
            policies,
        }
    }

    /// A node certificate from an organisation's own CA.
    pub fn organisation(node_name: &str, org: &str, policies: Vec<SrosPolicy>) -> Self {
        Self {
            subject: attrs(&[("C", "ES"), ("O", org), ("CN", node_name)]),
            issuer: attrs(&[("C", "ES"), ("O", org), ("CN", &format!("{org} Root CA"))]),
            policies,
        }
    }

    /// `demo()` with the talker's five policy blocks.
    pub fn demo_talker() -> Self {
        let c = PermissionConvention::default();
        let v = |items: &[&str]| items.iter().map(|s| s.as_bytes().to_vec()).collect();
        Self::demo(
            "talker",
            vec![
                SrosPolicy::new(1, 1, v(&["/clock"]), &c),
                SrosPolicy::new(2, 1, v(&["/chatter", "/rosout"]), &c),
                SrosPolicy::new(
                    4,
                    1,
                    v(&["/talker/get_loggers", "/talker/set_logger_level"]),
                    &c,
                ),
                SrosPolicy::new(5, 1, v(&["/use_sim_time"]), &c),
                SrosPolicy::new(3, 2, v(&["**"]), &c),
            ],
        )
    }
}

fn attr_oid(key: &str) -> Vec<u64> {
    match key {
        "CN" => vec![2, 5, 4, 3],
        "C" => vec![2, 5, 4, 6],
        "L" => vec![2, 5, 4, 7],
        "ST" => vec![2, 5, 4, 8],
        "O" => vec![2, 5, 4, 10],
        "OU" => vec![2, 5, 4, 11],
        dotted => der::parse_dotted(dotted).unwrap_or_else(|| vec![2, 5, 4, 3]),
    }
}

fn name(attrs: &NameAttributes) -> Vec<u8> {
    let rdns: Vec<Vec<u8>> = attrs
        .iter()
        .map(|(k, v)| {
            let value = if k == "C" {
                der::tlv(der::TAG_PRINTABLE_STRING, v.as_bytes())
            } else {
                der::utf8_string(v)
            };
            der::set(&[der::sequence(&[der::oid(&attr_oid(k)), value])])
        })
        .collect();
    der::sequence(&rdns)
}

fn policies_extension(policies: &[SrosPolicy]) -> Vec<u8> {
    let infos: Vec<Vec<u8>> = policies
        .iter()
        .map(|p| {
            let mut parts = vec![der::oid(&p.arcs())];
            if !p.values.is_empty() {
                let qualifiers: Vec<Vec<u8>> = p
                    .values
                    .iter()
                    .map(|v| der::sequence(&[der::oid(&OID_QT_CPS), der::ia5_string(v)]))
                    .collect();
                parts.push(der::sequence(&qualifiers));
            }
            der::sequence(&parts)
        })
        .collect();
    der::sequence(&[
        der::oid(&OID_CERT_POLICIES),
        der::boolean(true),
        der::octet_string(&der::sequence(&infos)),
    ])
}

/// DER encoding of a certificate described by `spec`.
pub fn build_cert(spec: &MockCertSpec) -> Vec<u8> {
    build(spec, 1)
}

fn build(spec: &MockCertSpec, serial: u64) -> Vec<u8> {
    let alg = der::sequence(&[der::oid(&OID_ED25519)]);
    let mut tbs = vec![
        der::explicit(0, &der::integer(2)),
        der::integer(serial),
        alg.clone(),
        name(&spec.issuer),
        der::sequence(&[
            der::utc_time("200101000000Z"),
            der::utc_time("400101000000Z"),
        ]),
        name(&spec.subject),
        der::sequence(&[alg.clone(), der::bit_string(&[0x42; 32])]),
    ];
    if !spec.policies.is_empty() {
        tbs.push(der::explicit(
            3,
            &der::sequence(&[policies_extension(&spec.policies)]),
        ));
    }
    der::sequence(&[der::sequence(&tbs), alg, der::bit_string(&[0x5a; 64])])
}

/// Leaf certificate followed by `len - 1` CA certificates.
pub fn build_chain(spec: &MockCertSpec, len: usize) -> Vec<Vec<u8>> {
    let mut chain = vec![build(spec, 1)];
    for depth in 1..len.max(1) {
        let ca = MockCertSpec {
            subject: spec.issuer.clone(),
            issuer: spec.issuer.clone(),
            policies: Vec::new(),
        };
        chain.push(build(&ca, 1 + depth as u64));
    }
    chain
}
