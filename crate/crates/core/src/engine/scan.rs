use std::io;
use std::net::SocketAddrV4;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use super::finding::{AdapterKind, Finding, NegativeProbe, Payload};
use super::options::{Execution, OptionsError, ScanOptions};
use super::ports::PortSet;
use super::rate::{Clock, RateLimiter, SystemClock};
use super::targets::TargetSpec;

/// A robot technology the engine can probe.
///
/// Implementations must be reentrant: the engine calls `probe` from many
/// workers at once and never serializes calls.
pub trait Adapter: Send + Sync {
    fn kind(&self) -> AdapterKind;

    /// Probes one endpoint. Failures are encoded as [`Payload::Negative`].
    fn probe(&self, target: SocketAddrV4, ctx: &ProbeContext) -> Payload;
}

/// Receives findings in completion order. Only ever called from one thread.
pub trait FindingSink {
    fn accept(&mut self, finding: Finding) -> io::Result<()>;
}

impl FindingSink for Vec<Finding> {
    fn accept(&mut self, finding: Finding) -> io::Result<()> {
        self.push(finding);
        Ok(())
    }
}

/// Adapts a closure into a [`FindingSink`].
pub struct FnSink<F>(pub F);

impl<F: FnMut(Finding) -> io::Result<()>> FindingSink for FnSink<F> {
    fn accept(&mut self, finding: Finding) -> io::Result<()> {
        (self.0)(finding)
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Options(#[from] OptionsError),
    #[error("result sink failed: {0}")]
    Sink(#[source] io::Error),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Default)]
pub struct ScanSummary {
    /// Top-level probes dispatched.
    pub probes: usize,
    pub positives: usize,
    /// Highest number of simultaneously running probes the engine observed.
    pub max_in_flight: usize,
    /// Every rate-limited initiation, including sub-probes issued through
    /// [`ProbeContext::sweep`], relative to the scan start.
    pub initiations: Vec<Duration>,
}

struct Shared {
    limiter: RateLimiter,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    cancelled: AtomicBool,
}

impl Shared {
    fn enter(&self) -> Slot<'_> {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(now, Ordering::SeqCst);
        Slot(self)
    }
}

struct Slot<'a>(&'a Shared);

impl Drop for Slot<'_> {
    fn drop(&mut self) {
        self.0.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

/// What an adapter sees while probing: scan options plus access to the
/// engine's bounds for sub-probes.
#[derive(Clone)]
pub struct ProbeContext {
    options: Arc<ScanOptions>,
    shared: Arc<Shared>,
    holds_slot: bool,
}

impl ProbeContext {
    /// A context outside any running scan, for calling adapters directly.
    pub fn new(options: ScanOptions) -> Self {
        Self::with_clock(options, Arc::new(SystemClock::new()))
    }

    pub fn with_clock(options: ScanOptions, clock: Arc<dyn Clock>) -> Self {
        let limiter = RateLimiter::new(options.rate, clock);
        Self {
            options: Arc::new(options),
            shared: Arc::new(Shared {
                limiter,
                in_flight: AtomicUsize::new(0),
                max_in_flight: AtomicUsize::new(0),
                cancelled: AtomicBool::new(false),
            }),
            holds_slot: false,
        }
    }

    pub fn options(&self) -> &ScanOptions {
        &self.options
    }

    pub fn timeout(&self) -> Duration {
        self.options.connect_timeout
    }

    pub fn extended(&self) -> bool {
        self.options.extended
    }

    /// Runs `f` over `items` under the same concurrency and rate bounds as
    /// top-level probes, returning results in input order.
    ///
    /// While the sweep runs, the calling probe gives up its own slot.
    pub fn sweep<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync,
    {
        if self.holds_slot {
            self.shared.in_flight.fetch_sub(1, Ordering::SeqCst);
        }
        let run = |item: &T| {
            self.shared.limiter.acquire();
            let _slot = self.shared.enter();
            f(item)
        };
        let out = match self.options.execution {
            Execution::Sequential => items.iter().map(run).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().with_max_len(1).map(run).collect()
            }
        };
        if self.holds_slot {
            std::mem::forget(self.shared.enter());
        }
        out
    }

    fn for_probe(&self) -> Self {
        Self {
            holds_slot: true,
            ..self.clone()
        }
    }
}

/// Drives one adapter over a set of endpoints.
pub struct Scanner {
    options: ScanOptions,
    clock: Arc<dyn Clock>,
}

impl Scanner {
    pub fn new(options: ScanOptions) -> Self {
        Self {
            options,
            clock: Arc::new(SystemClock::new()),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    /// Probes each endpoint exactly once and streams findings into `sink`
    /// as they complete.
    pub fn run(
        &self,
        adapter: &dyn Adapter,
        endpoints: &[SocketAddrV4],
        sink: &mut dyn FindingSink,
    ) -> Result<ScanSummary, EngineError> {
        self.options.validate()?;
        let ctx = ProbeContext::with_clock(self.options.clone(), self.clock.clone());
        if endpoints.is_empty() {
            return Ok(ScanSummary::default());
        }

        let mut positives = 0;
        let mut sink_error = None;
        let mut deliver = |finding: Finding| {
            if sink_error.is_some() {
                return;
            }
            positives += finding.is_positive() as usize;
            if let Err(e) = sink.accept(finding) {
                ctx.shared.cancelled.store(true, Ordering::SeqCst);
                sink_error = Some(e);
            }
        };

        let probes = match self.options.execution {
            Execution::Sequential => {
                let mut probes = 0;
                for &target in endpoints {
                    if let Some(finding) = probe_one(adapter, target, &ctx) {
                        probes += 1;
                        deliver(finding);
                    }
                }
                probes
            }
            #[cfg(feature = "parallel")]
            Execution::Parallel => self.run_parallel(adapter, endpoints, &ctx, &mut deliver)?,
        };

        if let Some(e) = sink_error {
            return Err(EngineError::Sink(e));
        }
        Ok(ScanSummary {
            probes,
            positives,
            max_in_flight: ctx.shared.max_in_flight.load(Ordering::SeqCst),
            initiations: ctx.shared.limiter.initiations(),
        })
    }

    #[cfg(feature = "parallel")]
    fn run_parallel(
        &self,
        adapter: &dyn Adapter,
        endpoints: &[SocketAddrV4],
        ctx: &ProbeContext,
        deliver: &mut dyn FnMut(Finding),
    ) -> Result<usize, EngineError> {
        use rayon::prelude::*;
        use std::sync::mpsc;

        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.options.concurrency)
            .thread_name(|i| format!("probe-{i}"))
            .build()
            .map_err(|e| EngineError::Pool(e.to_string()))?;

        let (tx, rx) = mpsc::channel::<Finding>();
        let mut probes = 0;
        std::thread::scope(|scope| {
            scope.spawn(move || {
                pool.install(|| {
                    endpoints
                        .par_iter()
                        .with_max_len(1)
                        .for_each_with(tx, |tx, &target| {
                            if let Some(finding) = probe_one(adapter, target, ctx) {
                                let _ = tx.send(finding);
                            }
                        })
                })
            });
            for finding in rx {
                probes += 1;
                deliver(finding);
            }
        });
        Ok(probes)
    }
}

fn probe_one(adapter: &dyn Adapter, target: SocketAddrV4, ctx: &ProbeContext) -> Option<Finding> {
    if ctx.shared.cancelled.load(Ordering::SeqCst) {
        return None;
    }
    ctx.shared.limiter.acquire();
    let payload = {
        let _slot = ctx.shared.enter();
        let probe_ctx = ctx.for_probe();
        catch_unwind(AssertUnwindSafe(|| adapter.probe(target, &probe_ctx))).unwrap_or_else(
            |panic| {
                let msg = panic
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| panic.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "probe panicked".into());
                Payload::Negative(NegativeProbe::new("probe_failed", msg))
            },
        )
    };
    let kind = adapter.kind();
    Some(Finding::new(target, kind, payload).unwrap_or_else(|e| {
        Finding::new(
            target,
            kind,
            Payload::Negative(NegativeProbe::new("adapter_error", e.to_string())),
        )
        .expect("negative payload fits every adapter")
    }))
}

/// Cartesian product in address-major order.
pub fn endpoints(targets: &TargetSpec, ports: &PortSet) -> Vec<SocketAddrV4> {
    targets
        .addresses()
        .iter()
        .flat_map(|&addr| {
            ports
                .ports()
                .iter()
                .map(move |&p| SocketAddrV4::new(addr, p))
        })
        .collect()
}

/// Probes every address × port pair.
pub fn run_scan(
    adapter: &dyn Adapter,
    targets: &TargetSpec,
    ports: &PortSet,
    options: &ScanOptions,
    sink: &mut dyn FindingSink,
) -> Result<ScanSummary, EngineError> {
    Scanner::new(options.clone()).run(adapter, &endpoints(targets, ports), sink)
}

/// Probes an explicit endpoint list, e.g. the output of an index query.
pub fn run_scan_pairs(
    adapter: &dyn Adapter,
    endpoints: &[SocketAddrV4],
    options: &ScanOptions,
    sink: &mut dyn FindingSink,
) -> Result<ScanSummary, EngineError> {
    Scanner::new(options.clone()).run(adapter, endpoints, sink)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::rate::{max_per_window, ManualClock};
    use crate::engine::targets::{parse_targets, TargetMode};
    use crate::ros::RosHost;
    use std::collections::HashMap;
    use std::sync::Mutex;

    /// Records every probe and reports the odd ports as positives.
    #[derive(Default)]
    struct Recorder {
        seen: Mutex<Vec<SocketAddrV4>>,
        fail_on: Option<SocketAddrV4>,
        hold: Duration,
    }

    impl Adapter for Recorder {
        fn kind(&self) -> AdapterKind {
            AdapterKind::Ros
        }

        fn probe(&self, target: SocketAddrV4, _ctx: &ProbeContext) -> Payload {
            self.seen.lock().unwrap().push(target);
            std::thread::sleep(self.hold);
            if Some(target) == self.fail_on {
                panic!("injected failure");
            }
            if target.port() % 2 == 1 {
                Payload::Ros(RosHost {
                    state: None,
                    nature: None,
                })
            } else {
                Payload::Negative(NegativeProbe::new("unreachable", "closed"))
            }
        }
    }

    fn spec(text: &str) -> TargetSpec {
        parse_targets(text, TargetMode::Auto).unwrap()
    }

    fn modes() -> Vec<Execution> {
        vec![
            Execution::Sequential,
            #[cfg(feature = "parallel")]
            Execution::Parallel,
        ]
    }

    #[test]
    fn empty_ports_terminate_immediately() {
        let adapter = Recorder::default();
        let mut out = Vec::new();
        let summary = run_scan(
            &adapter,
            &spec("10.0.0.0/30"),
            &PortSet::empty(),
            &ScanOptions::default(),
            &mut out,
        )
        .unwrap();
        assert!(out.is_empty());
        assert_eq!(summary.probes, 0);
    }

    #[test]
    fn probes_every_pair_exactly_once() {
        for execution in modes() {
            let adapter = Recorder::default();
            let targets = spec("10.1.0.0/28");
            let ports = crate::engine::parse_ports("1-5,80").unwrap();
            let opts = ScanOptions::default()
                .with_concurrency(8)
                .with_rate(100_000)
                .with_execution(execution);
            let mut out = Vec::new();
            let summary = run_scan(&adapter, &targets, &ports, &opts, &mut out).unwrap();

            let expected = endpoints(&targets, &ports);
            let mut seen = adapter.seen.into_inner().unwrap();
            seen.sort();
            let mut want = expected.clone();
            want.sort();
            assert_eq!(seen, want);
            assert_eq!(out.len(), expected.len());
            assert_eq!(summary.probes, expected.len());
            assert_eq!(summary.positives, 16 * 3);
        }
    }

    #[test]
    fn concurrency_bound_is_respected() {
        for execution in modes() {
            let adapter = Recorder {
                hold: Duration::from_millis(2),
                ..Default::default()
            };
            let opts = ScanOptions::default()
                .with_concurrency(4)
                .with_rate(100_000)
                .with_execution(execution);
            let mut out = Vec::new();
            let summary = run_scan(
                &adapter,
                &spec("10.2.0.0/26"),
                &PortSet::single(7).unwrap(),
                &opts,
                &mut out,
            )
            .unwrap();
            assert_eq!(out.len(), 64);
            assert!(summary.max_in_flight <= 4, "{}", summary.max_in_flight);
        }
    }

    #[test]
    fn rate_bound_with_manual_clock() {
        let clock = Arc::new(ManualClock::new());
        let adapter = Recorder::default();
        let opts = ScanOptions::default()
            .with_rate(10)
            .with_execution(Execution::Sequential);
        let mut out = Vec::new();
        let summary = Scanner::new(opts)
            .with_clock(clock.clone())
            .run(
                &adapter,
                &endpoints(&spec("10.3.0.0/27"), &PortSet::single(1).unwrap()),
                &mut out,
            )
            .unwrap();
        assert_eq!(summary.initiations.len(), 32);
        assert_eq!(max_per_window(&summary.initiations), 10);
        assert!(clock.now() >= Duration::from_secs(3));
    }

    #[test]
    fn injected_failure_is_isolated() {
        for execution in modes() {
            let targets = spec("10.4.0.0/29");
            let ports = PortSet::single(3).unwrap();
            let opts = ScanOptions::default()
                .with_rate(100_000)
                .with_execution(execution);

            let clean = Recorder::default();
            let mut baseline = Vec::new();
            run_scan(&clean, &targets, &ports, &opts, &mut baseline).unwrap();

            let victim = SocketAddrV4::new("10.4.0.5".parse().unwrap(), 3);
            let faulty = Recorder {
                fail_on: Some(victim),
                ..Default::default()
            };
            let mut faulted = Vec::new();
            run_scan(&faulty, &targets, &ports, &opts, &mut faulted).unwrap();

            let by_target = |v: &[Finding]| -> HashMap<SocketAddrV4, Payload> {
                v.iter().map(|f| (f.target, f.payload.clone())).collect()
            };
            let base = by_target(&baseline);
            let got = by_target(&faulted);
            assert_eq!(got.len(), 8);
            for (target, payload) in &base {
                if *target == victim {
                    match &got[target] {
                        Payload::Negative(n) => {
                            assert_eq!(n.verdict, "probe_failed");
                            assert!(n.detail.contains("injected failure"));
                        }
                        other => panic!("expected negative, got {other:?}"),
                    }
                } else {
                    assert_eq!(&got[target], payload);
                }
            }
        }
    }

    #[test]
    fn sink_failure_aborts_scan() {
        for execution in modes() {
            let adapter = Recorder::default();
            let opts = ScanOptions::default()
                .with_rate(100_000)
                .with_execution(execution);
            let mut count = 0;
            let mut sink = FnSink(|_f: Finding| {
                count += 1;
                if count == 3 {
                    Err(io::Error::new(io::ErrorKind::BrokenPipe, "closed"))
                } else {
                    Ok(())
                }
            });
            let err = run_scan(
                &adapter,
                &spec("10.5.0.0/24"),
                &PortSet::single(1).unwrap(),
                &opts,
                &mut sink,
            )
            .unwrap_err();
            assert!(matches!(err, EngineError::Sink(_)));
        }
    }

    #[test]
    fn sweep_preserves_order_and_bounds() {
        for execution in modes() {
            let opts = ScanOptions::default()
                .with_concurrency(3)
                .with_rate(100_000)
                .with_execution(execution);
            let ctx = ProbeContext::new(opts);
            let items: Vec<u32> = (0..50).collect();
            let out = ctx.sweep(&items, |i| {
                std::thread::sleep(Duration::from_micros(200));
                i * 2
            });
            assert_eq!(out, (0..50).map(|i| i * 2).collect::<Vec<_>>());
            assert_eq!(ctx.shared.in_flight.load(Ordering::SeqCst), 0);
        }
    }

    #[test]
    fn invalid_options_are_rejected() {
        let adapter = Recorder::default();
        let mut out = Vec::new();
        let err = run_scan(
            &adapter,
            &spec("10.0.0.1"),
            &PortSet::single(1).unwrap(),
            &ScanOptions::default().with_rate(0),
            &mut out,
        )
        .unwrap_err();
        assert!(matches!(err, EngineError::Options(OptionsError::Rate)));
    }
}
