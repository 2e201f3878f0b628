//! Footprinting scanner for robot-related network endpoints.
//!
//! Three adapters are provided: [`ros`] detects ROS masters over the XML-RPC
//! master API, [`sros`] harvests SROS node certificates from an aborted TLS
//! handshake, and [`routers`] identifies industrial-router web consoles and
//! audits them for factory credentials. The [`engine`] schedules probes with
//! bounded concurrency and a rate ceiling, [`report`] serializes findings, and
//! [`mocknet`] emulates every target class on loopback for testing.

pub mod cli;
pub mod engine;
pub mod enrichment;
pub mod mocknet;
pub mod proto;
pub mod report;
pub mod ros;
pub mod routers;
pub mod sros;

pub use engine::{
    parse_ports, parse_targets, run_scan, run_scan_pairs, Adapter, AdapterKind, Finding,
    NegativeProbe, Payload, PortSet, ProbeContext, ScanOptions, ScanSummary, TargetSpec,
};

/// Version string embedded in report metadata.
pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
