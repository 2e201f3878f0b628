//! Loopback emulation of every target class: ROS masters, SROS TLS nodes,
//! the router web consoles and a few decoys. A [`FleetManifest`] describes
//! a set of hosts and doubles as the oracle for what a scan must find.

mod certgen;
mod fleet;
mod ros_master;
mod router;
mod server;
mod sros_node;

pub use certgen::{build_cert, build_chain, MockCertSpec};
pub use fleet::{
    decoy_verdict, expected_router, project, spawn_fleet, CertPreset, CertSpec, DecoyKind,
    Expectation, Fleet, FleetError, FleetManifest, GraphPreset, GraphSpec, HostHandle, HostKind,
    ManifestHost, Outcome, RunningHost,
};
pub use ros_master::{
    spawn_echo, spawn_faulting_xmlrpc, spawn_plain_http, MasterLog, MockNode, MockService,
    MockTopic, RosGraph, RosMasterMock, MUTATING_METHODS,
};
pub use router::{RouterAuth, RouterConfig, RouterLog, RouterMock, SIERRA_SERVER, WESTERMO_REALM};
pub use server::{closed_port, serve_http, Conn, ConnStats, Handler, MockServer};
pub use sros_node::{HandshakeLog, SrosNodeConfig, SrosNodeMock};
