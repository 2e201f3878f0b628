//! Target enumeration and probe scheduling.
//!
//! With the `parallel` feature (default) probes run on a worker pool whose
//! size is the configured concurrency, so each worker owns at most one
//! connection at a time. Without it every probe runs on the calling thread.

mod finding;
mod options;
mod ports;
pub mod rate;
mod scan;
mod targets;

pub use finding::{now, AdapterKind, Finding, NegativeProbe, Payload, PayloadMismatch};
pub use options::{
    Execution, OptionsError, ScanOptions, DEFAULT_CONCURRENCY, DEFAULT_RATE, DEFAULT_TIMEOUT,
};
pub use ports::{parse_ports, PortError, PortSet};
pub use scan::{
    endpoints, run_scan, run_scan_pairs, Adapter, EngineError, FindingSink, FnSink, ProbeContext,
    ScanSummary, Scanner,
};
pub use targets::{parse_targets, TargetError, TargetMode, TargetSource, TargetSpec};
