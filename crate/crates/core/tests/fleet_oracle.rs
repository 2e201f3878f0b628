//! Scanning any fleet yields exactly the findings its manifest predicts.

mod common;

use std::net::TcpListener;
use std::time::Duration;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;
use robotrace::engine::{Adapter, AdapterKind, Finding, PortSet, ScanOptions, Scanner};
use robotrace::mocknet::{
    project, spawn_fleet, CertPreset, CertSpec, DecoyKind, FleetError, FleetManifest, GraphPreset,
    GraphSpec, HostKind, ManifestHost, RosGraph, RosMasterMock, RouterAuth, RouterConfig,
};
use robotrace::ros::{footprint_ros, RosAdapter};
use robotrace::routers::{CredentialBook, RouterAdapter, Vendor};
use robotrace::sros::SrosAdapter;

use common::loopback;

fn adapter_for(kind: AdapterKind) -> Box<dyn Adapter> {
    match kind {
        AdapterKind::Ros => Box::new(RosAdapter::default()),
        AdapterKind::Sros => Box::new(SrosAdapter {
            extended_ports: PortSet::empty(),
            ..SrosAdapter::default()
        }),
        AdapterKind::IRouters => {
            Box::new(RouterAdapter::default().with_attempt_delay(Duration::ZERO))
        }
    }
}

fn check_fleet(manifest: &FleetManifest, extended: bool) -> Result<(), TestCaseError> {
    let fleet = spawn_fleet(manifest).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let options = ScanOptions::default()
        .extended(extended)
        .with_timeout(Duration::from_secs(3));
    let mut observed = Vec::new();
    for kind in [AdapterKind::Ros, AdapterKind::Sros, AdapterKind::IRouters] {
        let targets = fleet.addrs(kind);
        let mut findings: Vec<Finding> = Vec::new();
        Scanner::new(options.clone())
            .run(adapter_for(kind).as_ref(), &targets, &mut findings)
            .unwrap();
        prop_assert_eq!(findings.len(), targets.len());
        observed.extend(findings.iter().map(project));
    }
    observed.sort();
    prop_assert_eq!(
        observed,
        fleet.expected_findings(extended, &CredentialBook::bundled())
    );
    Ok(())
}

fn host_kind() -> impl Strategy<Value = HostKind> {
    let adapter = prop_oneof![
        Just(AdapterKind::Ros),
        Just(AdapterKind::Sros),
        Just(AdapterKind::IRouters)
    ];
    let decoy = prop_oneof![
        Just(DecoyKind::Closed),
        Just(DecoyKind::PlainHttp),
        Just(DecoyKind::FaultingXmlrpc),
        Just(DecoyKind::Echo)
    ];
    let vendor = proptest::sample::select(Vendor::ALL.to_vec());
    let auth = prop_oneof![
        Just(RouterAuth::Open),
        Just(RouterAuth::credentials("admin", "not-default-42")),
        Just(RouterAuth::credentials("adm", "adm")),
        Just(RouterAuth::credentials("admin", "westermo")),
        Just(RouterAuth::credentials("admin", "")),
        Just(RouterAuth::credentials("user", "12345")),
    ];
    prop_oneof![
        (any::<u64>(), 0usize..6).prop_map(|(seed, n)| HostKind::RosMaster {
            graph: GraphSpec::Custom(RosGraph::random(&mut StdRng::seed_from_u64(seed), n)),
        }),
        prop_oneof![
            Just(GraphPreset::Empty),
            Just(GraphPreset::RosoutOnly),
            Just(GraphPreset::TalkerListener)
        ]
        .prop_map(|p| HostKind::RosMaster {
            graph: GraphSpec::Preset(p)
        }),
        (
            prop_oneof![
                Just(CertPreset::DemoMaster),
                Just(CertPreset::DemoTalker),
                Just(CertPreset::OrgMaster)
            ],
            1usize..4,
            any::<bool>()
        )
            .prop_map(
                |(cert, chain_len, request_client_cert)| HostKind::SrosNode {
                    cert: CertSpec::Preset(cert),
                    chain_len,
                    request_client_cert,
                }
            ),
        (vendor, auth).prop_map(|(vendor, auth)| HostKind::Router(RouterConfig { vendor, auth })),
        (decoy, adapter).prop_map(|(decoy, against)| HostKind::Decoy { decoy, against }),
    ]
}

fn manifest() -> impl Strategy<Value = FleetManifest> {
    proptest::collection::vec(host_kind(), 0..10).prop_map(|kinds| {
        kinds
            .into_iter()
            .fold(FleetManifest::default(), FleetManifest::push)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scan_equals_oracle(m in manifest(), extended in any::<bool>()) {
        check_fleet(&m, extended)?;
    }

    #[test]
    fn manifest_text_round_trips(m in manifest()) {
        prop_assert_eq!(FleetManifest::parse(&m.to_toml()).unwrap(), m);
    }
}

#[test]
fn empty_manifest_is_an_empty_fleet() {
    let fleet = spawn_fleet(&FleetManifest::default()).unwrap();
    assert!(fleet.hosts.is_empty());
    assert!(fleet
        .expected_findings(true, &CredentialBook::bundled())
        .is_empty());
}

#[test]
fn mixed_fleet_partitions_by_adapter() {
    let m = FleetManifest::default()
        .push(HostKind::RosMaster {
            graph: GraphSpec::default(),
        })
        .push(HostKind::SrosNode {
            cert: CertSpec::Preset(CertPreset::DemoMaster),
            chain_len: 1,
            request_client_cert: true,
        })
        .push(HostKind::Router(RouterConfig {
            vendor: Vendor::Ewon,
            auth: RouterAuth::Open,
        }))
        .push(HostKind::Router(RouterConfig {
            vendor: Vendor::MoxaV1,
            auth: RouterAuth::Open,
        }));
    let fleet = spawn_fleet(&m).unwrap();
    let expected = fleet.expected_findings(false, &CredentialBook::bundled());
    let count = |k| expected.iter().filter(|e| e.adapter == k).count();
    assert_eq!(
        (
            count(AdapterKind::Ros),
            count(AdapterKind::Sros),
            count(AdapterKind::IRouters)
        ),
        (1, 1, 2)
    );
}

#[test]
fn hundred_routers_with_thirty_four_defaults() {
    let book = CredentialBook::bundled();
    let m = FleetManifest::routers(100, 34, &book);
    let fleet = spawn_fleet(&m).unwrap();
    let not_secure = fleet
        .expected_findings(false, &book)
        .iter()
        .filter(|e| matches!(&e.outcome, robotrace::mocknet::Outcome::Router { security, .. } if security.as_str() == "not_secure"))
        .count();
    assert_eq!(not_secure, 34);
}

#[test]
fn partial_spawn_rolls_back() {
    let taken = TcpListener::bind(loopback(0)).unwrap();
    let port = match taken.local_addr().unwrap() {
        std::net::SocketAddr::V4(a) => a.port(),
        _ => unreachable!(),
    };
    let mut m = FleetManifest::default().push(HostKind::RosMaster {
        graph: GraphSpec::default(),
    });
    m.hosts.push(ManifestHost {
        port,
        ..ManifestHost::new(HostKind::RosMaster {
            graph: GraphSpec::default(),
        })
    });
    match spawn_fleet(&m) {
        Err(FleetError::Spawn { index, .. }) => assert_eq!(index, 1),
        other => panic!(
            "expected a spawn failure, got {:?}",
            other.map(|f| f.hosts.len())
        ),
    }
}

#[test]
fn random_graph_is_served_consistently() {
    let graph = RosGraph::random(&mut StdRng::seed_from_u64(10), 10);
    let master = RosMasterMock::spawn(loopback(0), graph.clone()).unwrap();
    let state = footprint_ros(master.addr(), Duration::from_secs(3)).unwrap();
    assert_eq!(state, graph.expected_state());
    assert!(state.is_closed());
    assert!(
        master.log.mutating_calls().is_empty(),
        "footprinting must stay read-only"
    );
}
