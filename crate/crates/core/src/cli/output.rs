use std::io::Write;
use std::path::Path;

use super::{default_demo_manifest, spawn_demo, Failure, EXIT_FATAL, EXIT_OK};
use crate::engine::{AdapterKind, Finding, Payload, ScanOptions, Scanner};
use crate::mocknet::{project, Expectation, FleetManifest};
use crate::ros::RosAdapter;
use crate::routers::{CredentialBook, RouterAdapter, Security};
use crate::sros::SrosAdapter;

fn adapter_label(adapter: AdapterKind) -> &'static str {
    match adapter {
        AdapterKind::Ros => "ROS",
        AdapterKind::Sros => "SROS",
        AdapterKind::IRouters => "router",
    }
}

/// Progress text for one finding, newline terminated.
pub fn describe_finding(finding: &Finding, extended: bool) -> String {
    let t = finding.target;
    let (ip, port) = (t.ip(), t.port());
    match &finding.payload {
        Payload::Ros(host) => {
            let mut out = format!("[+] ROS Host found at {ip}:{port}\n");
            if extended {
                if let Some(state) = &host.state {
                    out.push_str(&state.describe());
                }
                if let Some(nature) = host.nature {
                    out.push_str(&format!("\tSystem: {}\n", nature.as_str()));
                }
            }
            out
        }
        Payload::Sros(host) => {
            let mut out = format!("[+] SROS host found!!!\n{}", host.master.describe());
            for node in &host.nodes {
                match &node.identity {
                    Some(identity) => out.push_str(&identity.describe()),
                    None => out.push_str(&format!("\t({ip}, {}, None)\n", node.port)),
                }
            }
            out
        }
        Payload::Router(r) => {
            let secure = match r.security {
                Security::Secure => "is secure",
                Security::NotSecure => "is not secure",
            };
            let mut out = format!(
                "[+] {} router in http://{ip}:{port} {secure}\n",
                r.model.vendor.display_name()
            );
            if r.open_access {
                out.push_str("\tNo login required\n");
            } else if let Some(c) = &r.winning_credentials {
                out.push_str(&format!(
                    "\tDefault credentials {}:{}\n",
                    c.username, c.password
                ));
            }
            if let Some(e) = &r.enrichment {
                out.push_str(&format!(
                    "\tCountry: {} ASN: {}\n",
                    e.country, e.asn_description
                ));
            }
            out
        }
        Payload::Negative(n) => format!(
            "[-] Error connecting to host {ip}:{port} -> {}\n\tNot a {} host\n",
            n.detail,
            adapter_label(finding.adapter)
        ),
    }
}

/// Spawns a fleet, prints its predicted findings as JSON lines and, with
/// `scan`, checks a real scan against them.
pub(super) fn demo(
    manifest: Option<&Path>,
    scan: bool,
    extended: bool,
    stdout: &mut dyn Write,
) -> Result<i32, Failure> {
    let manifest = match manifest {
        Some(path) => FleetManifest::load(path).map_err(|e| Failure::Fatal(e.to_string()))?,
        None => default_demo_manifest(),
    };
    let fleet = spawn_demo(&manifest).map_err(Failure::Fatal)?;
    let book = CredentialBook::bundled();
    let expected = fleet.expected_findings(extended, &book);
    let io = |e: std::io::Error| Failure::Fatal(e.to_string());
    for e in &expected {
        writeln!(
            stdout,
            "{}",
            serde_json::to_string(e).expect("expectation serializes")
        )
        .map_err(io)?;
    }
    if !scan {
        return Ok(EXIT_OK);
    }

    let options = ScanOptions::default()
        .extended(extended)
        .with_timeout(std::time::Duration::from_secs(2));
    let mut observed: Vec<Expectation> = Vec::new();
    for kind in [AdapterKind::Ros, AdapterKind::Sros, AdapterKind::IRouters] {
        let targets = fleet.addrs(kind);
        if targets.is_empty() {
            continue;
        }
        let adapter: Box<dyn crate::engine::Adapter> = match kind {
            AdapterKind::Ros => Box::new(RosAdapter::default()),
            // The extended sweep would walk every port of loopback.
            AdapterKind::Sros => Box::new(SrosAdapter {
                extended_ports: crate::engine::PortSet::empty(),
                ..SrosAdapter::default()
            }),
            AdapterKind::IRouters => {
                Box::new(RouterAdapter::default().with_attempt_delay(std::time::Duration::ZERO))
            }
        };
        let mut findings: Vec<Finding> = Vec::new();
        Scanner::new(options.clone())
            .run(adapter.as_ref(), &targets, &mut findings)
            .map_err(|e| Failure::Fatal(e.to_string()))?;
        observed.extend(findings.iter().map(project));
    }
    observed.sort();
    fleet.teardown();

    if observed == expected {
        writeln!(
            stdout,
            "scan matches prediction ({} findings)",
            observed.len()
        )
        .map_err(io)?;
        Ok(EXIT_OK)
    } else {
        for o in observed.iter().filter(|o| !expected.contains(o)) {
            writeln!(
                stdout,
                "unexpected: {}",
                serde_json::to_string(o).unwrap_or_default()
            )
            .map_err(io)?;
        }
        for e in expected.iter().filter(|e| !observed.contains(e)) {
            writeln!(
                stdout,
                "missing: {}",
                serde_json::to_string(e).unwrap_or_default()
            )
            .map_err(io)?;
        }
        Ok(EXIT_FATAL)
    }
}
