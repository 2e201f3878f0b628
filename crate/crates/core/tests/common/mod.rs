#![allow(dead_code)]

use std::net::{Ipv4Addr, SocketAddrV4};
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::Rng;
use robotrace::engine::{AdapterKind, Finding, NegativeProbe, Payload, ScanOptions};
use robotrace::enrichment::EnrichmentRecord;
use robotrace::mocknet::{build_cert, MockCertSpec, RosGraph};
use robotrace::report::{ReportMetadata, ScanReport};
use robotrace::ros::{RosHost, SystemNature};
use robotrace::routers::{
    AttemptOutcome, Credential, CredentialAttempt, RouterFinding, RouterModel, Security, Vendor,
};
use robotrace::sros::{
    parse_policies, HarvestedCertificate, PermissionConvention, SrosHost, SrosNodeIdentity,
    SrosPolicy,
};

pub fn loopback(port: u16) -> SocketAddrV4 {
    SocketAddrV4::new(Ipv4Addr::LOCALHOST, port)
}

/// Polls `cond` until it holds or `limit` passes.
pub fn wait_for(limit: Duration, mut cond: impl FnMut() -> bool) -> bool {
    let start = Instant::now();
    while start.elapsed() < limit {
        if cond() {
            return true;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    cond()
}

pub fn random_text<R: Rng>(rng: &mut R, max: usize) -> String {
    let len = rng.gen_range(0..=max);
    (0..len)
        .map(|_| rng.gen_range(0x20u8..0x7f) as char)
        .collect()
}

pub fn random_policy<R: Rng>(rng: &mut R, convention: &PermissionConvention) -> SrosPolicy {
    let kind_arc = rng.gen_range(1..=6);
    let perm_arc = rng.gen_range(1..=3);
    let n = rng.gen_range(1..=4);
    let values = (0..n)
        .map(|_| match rng.gen_range(0..4) {
            0 => b"**".to_vec(),
            1 => format!("/node_{}/get_loggers", rng.gen_range(0..50)).into_bytes(),
            2 => format!("/topic_{}", rng.gen_range(0..50)).into_bytes(),
            _ => {
                let len = rng.gen_range(1..12);
                (0..len).map(|_| rng.gen_range(b'!'..=b'~')).collect()
            }
        })
        .collect();
    SrosPolicy::new(kind_arc, perm_arc, values, convention)
}

fn random_target<R: Rng>(rng: &mut R) -> SocketAddrV4 {
    // A small space so collisions, and with them the sort tie-breakers, occur.
    SocketAddrV4::new(
        Ipv4Addr::new(10, 0, rng.gen_range(0..3), rng.gen_range(0..4)),
        rng.gen_range(11311..11314),
    )
}

fn random_payload<R: Rng>(rng: &mut R, adapter: AdapterKind) -> Payload {
    if rng.gen_bool(0.35) {
        let verdict = [
            "unreachable",
            "malformed",
            "xmlrpc_not_ros",
            "not_tls",
            "not_router",
        ]
        .choose(rng)
        .unwrap();
        return Payload::Negative(NegativeProbe::new(*verdict, random_text(rng, 30)));
    }
    match adapter {
        AdapterKind::Ros => {
            let extended = rng.gen_bool(0.5);
            let n = rng.gen_range(0..5);
            let state = extended.then(|| RosGraph::random(rng, n).expected_state());
            Payload::Ros(RosHost {
                nature: state.as_ref().map(|_| {
                    *[
                        SystemNature::Empty,
                        SystemNature::Real,
                        SystemNature::Simulation,
                    ]
                    .choose(rng)
                    .unwrap()
                }),
                state,
            })
        }
        AdapterKind::Sros => {
            let c = PermissionConvention::default();
            let policies = (0..rng.gen_range(0..4))
                .map(|_| random_policy(rng, &c))
                .collect();
            let spec = if rng.gen_bool(0.5) {
                MockCertSpec::demo(&format!("node{}", rng.gen_range(0..9)), policies)
            } else {
                MockCertSpec::organisation("master", "Acme Robotics", policies)
            };
            let cert =
                HarvestedCertificate::from_der(&build_cert(&spec)).expect("mock cert parses");
            let target = random_target(rng);
            let identity = SrosNodeIdentity::from_certificate(target, &cert, parse_policies(&cert));
            Payload::Sros(SrosHost {
                master: identity,
                nodes: Vec::new(),
            })
        }
        AdapterKind::IRouters => {
            let vendor = *Vendor::ALL.choose(rng).unwrap();
            let attempts: Vec<CredentialAttempt> = (0..rng.gen_range(0..3))
                .map(|_| CredentialAttempt {
                    username: random_text(rng, 8),
                    password: random_text(rng, 8),
                    outcome: *[
                        AttemptOutcome::Accepted,
                        AttemptOutcome::Rejected,
                        AttemptOutcome::Indeterminate,
                    ]
                    .choose(rng)
                    .unwrap(),
                })
                .collect();
            let winning = attempts
                .iter()
                .find(|a| a.outcome == AttemptOutcome::Accepted)
                .map(|a| Credential::new(&a.username, &a.password));
            let open_access = winning.is_none() && rng.gen_bool(0.2);
            Payload::Router(RouterFinding {
                model: RouterModel {
                    vendor,
                    signature_header: ("Server".into(), random_text(rng, 12)),
                },
                security: if winning.is_some() || open_access {
                    Security::NotSecure
                } else {
                    Security::Secure
                },
                winning_credentials: winning,
                open_access,
                attempts,
                enrichment: rng.gen_bool(0.5).then(|| {
                    EnrichmentRecord::new(
                        Ipv4Addr::new(192, 0, 2, rng.gen()),
                        "US",
                        &random_text(rng, 10),
                    )
                }),
            })
        }
    }
}

pub fn random_finding<R: Rng>(rng: &mut R) -> Finding {
    let adapter = *[AdapterKind::Ros, AdapterKind::Sros, AdapterKind::IRouters]
        .choose(rng)
        .unwrap();
    let timestamp = Utc
        .timestamp_micros(1_700_000_000_000_000 + rng.gen_range(0..5_000_000))
        .unwrap();
    let mut f = Finding::at(
        random_target(rng),
        adapter,
        random_payload(rng, adapter),
        timestamp,
    )
    .unwrap();
    f.indexed = rng.gen_bool(0.1);
    f
}

pub fn random_report<R: Rng>(rng: &mut R, n: usize) -> ScanReport {
    let findings = (0..n).map(|_| random_finding(rng)).collect();
    ScanReport::new(
        ReportMetadata {
            tool_version: robotrace::TOOL_VERSION.into(),
            started: Utc.timestamp_micros(1_700_000_000_000_000).unwrap(),
            finished: Utc.timestamp_micros(1_700_000_010_000_000).unwrap(),
            adapter: AdapterKind::Ros,
            options: ScanOptions::default(),
        },
        findings,
    )
}
