//! Parallel vs sequential dispatch over a loopback fleet of ROS masters.
//!
//! Loopback has no latency, so the first group mostly measures CPU cost.
//! The second adds a fixed delay per probe to stand in for a WAN round trip,
//! which is where the worker pool pays off.

use std::net::SocketAddrV4;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use robotrace::engine::{Adapter, Execution, Finding, Payload, ProbeContext, ScanOptions, Scanner};
use robotrace::mocknet::{spawn_fleet, FleetManifest, GraphPreset, GraphSpec, HostKind};
use robotrace::ros::RosAdapter;
use robotrace::AdapterKind;

struct Delayed<A>(A, Duration);

impl<A: Adapter> Adapter for Delayed<A> {
    fn kind(&self) -> AdapterKind {
        self.0.kind()
    }

    fn probe(&self, target: SocketAddrV4, ctx: &ProbeContext) -> Payload {
        std::thread::sleep(self.1);
        self.0.probe(target, ctx)
    }
}

fn fleet_of(n: usize) -> FleetManifest {
    (0..n).fold(FleetManifest::default(), |m, _| {
        m.push(HostKind::RosMaster {
            graph: GraphSpec::Preset(GraphPreset::TalkerListener),
        })
    })
}

fn modes() -> Vec<(&'static str, Execution)> {
    #[allow(unused_mut)]
    let mut modes = vec![("sequential", Execution::Sequential)];
    #[cfg(feature = "parallel")]
    modes.push(("parallel", Execution::Parallel));
    modes
}

fn bench_group(c: &mut Criterion, name: &str, adapter: &dyn Adapter, targets: &[SocketAddrV4]) {
    let mut group = c.benchmark_group(name);
    group.sample_size(10);
    for (mode, execution) in modes() {
        let options = ScanOptions::default()
            .extended(true)
            .with_rate(100_000)
            .with_concurrency(16)
            .with_timeout(Duration::from_secs(2))
            .with_execution(execution);
        group.bench_with_input(
            BenchmarkId::new(mode, targets.len()),
            &options,
            |b, options| {
                b.iter(|| {
                    let mut findings: Vec<Finding> = Vec::new();
                    Scanner::new(options.clone())
                        .run(adapter, targets, &mut findings)
                        .expect("scan runs");
                    assert_eq!(findings.len(), targets.len());
                })
            },
        );
    }
    group.finish();
}

fn dispatch(c: &mut Criterion) {
    let fleet = spawn_fleet(&fleet_of(32)).expect("fleet starts");
    let targets = fleet.addrs(AdapterKind::Ros);
    bench_group(c, "ros_extended_scan", &RosAdapter::default(), &targets);
    bench_group(
        c,
        "ros_extended_scan_5ms_rtt",
        &Delayed(RosAdapter::default(), Duration::from_millis(5)),
        &targets,
    );
    fleet.teardown();
}

criterion_group!(benches, dispatch);
criterion_main!(benches);
