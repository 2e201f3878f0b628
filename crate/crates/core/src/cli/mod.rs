//! Command-line front end.
//!
//! [`run`] takes its streams as arguments so the whole pipeline can be
//! driven from tests.

mod output;

use std::io::{BufWriter, Read, Write};
use std::net::SocketAddrV4;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::{CommandFactory, Parser, Subcommand};

use crate::engine::{
    endpoints, now, parse_ports, parse_targets, AdapterKind, EngineError, Execution, Finding,
    FnSink, PortSet, ScanOptions, Scanner, TargetError, TargetMode, DEFAULT_CONCURRENCY,
    DEFAULT_RATE,
};
use crate::enrichment::{
    query_index, CymruWhois, FixtureWhois, IndexQuery, ShodanProvider, WhoisLookup,
};
use crate::mocknet::{self, FleetManifest};
use crate::report::{write_report, Format, ReportMetadata, ScanReport};
use crate::ros::{RosAdapter, MASTER_PORT};
use crate::routers::{CredentialBook, RouterAdapter, Vendor};
use crate::sros::SrosAdapter;

pub use output::describe_finding;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FATAL: i32 = 2;

const ABOUT: &str = "Footprint ROS masters, SROS nodes and industrial routers.

Targets come from -a (an address or CIDR block), -i (a file with one
address per line) or, when neither is given, standard input. Each target is
probed on every port of -p. Positive findings print as [+] lines and
failures as [-] lines; -o writes the full report as CSV or JSON.";

#[derive(Debug, Parser)]
#[command(name = "robotrace", version, about = ABOUT, args_conflicts_with_subcommands = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,

    /// Adapter: ROS, SROS or IROUTERS.
    #[arg(short = 't', long = "type", value_name = "TYPE")]
    pub adapter: Option<AdapterKind>,

    /// Address or CIDR block to scan.
    #[arg(short = 'a', long = "address", conflicts_with = "input")]
    pub address: Option<String>,

    /// Ports: N, N-M, or a comma-separated mix. Defaults to 11311 for
    /// ROS/SROS and 80,443 for IROUTERS.
    #[arg(short = 'p', long = "ports")]
    pub ports: Option<String>,

    /// Second-phase footprinting (ROS graph, SROS node sweep).
    #[arg(short = 'e', long = "extended")]
    pub extended: bool,

    /// File with one address per line.
    #[arg(short = 'i', long = "input")]
    pub input: Option<PathBuf>,

    /// Write the report here.
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,

    /// Report format; defaults to json for *.json outputs, csv otherwise.
    #[arg(long)]
    pub format: Option<Format>,

    /// Maximum probe initiations per second.
    #[arg(long, default_value_t = DEFAULT_RATE)]
    pub rate: u32,

    /// Maximum probes in flight.
    #[arg(long, default_value_t = DEFAULT_CONCURRENCY)]
    pub concurrency: usize,

    /// Connect and read timeout in seconds.
    #[arg(long, default_value_t = 3.0)]
    pub timeout: f64,

    /// Run probes one at a time on the main thread.
    #[arg(long)]
    pub sequential: bool,

    /// IROUTERS only: take targets from an internet index instead of -a/-i.
    /// The only provider is `shodan`, keyed by SHODAN_API_KEY.
    #[arg(long, value_name = "PROVIDER")]
    pub provider: Option<String>,

    /// Base URL of the index provider's API.
    #[arg(long, value_name = "URL", requires = "provider")]
    pub provider_url: Option<String>,

    /// Maximum targets per vendor from the index provider.
    #[arg(long, default_value_t = 100)]
    pub limit: usize,

    /// Country/ASN source for router findings: `bundled`, `cymru`, or a
    /// whois table file.
    #[arg(long, value_name = "SOURCE")]
    pub whois: Option<String>,

    /// Factory credential file for IROUTERS (TOML).
    #[arg(long, value_name = "FILE")]
    pub credentials: Option<PathBuf>,

    /// Seconds between login attempts on one router.
    #[arg(long, default_value_t = 1.0)]
    pub attempt_delay: f64,

    /// Ports swept per host by an extended SROS scan. The default, every
    /// port, is only sensible for a handful of hosts.
    #[arg(long, value_name = "PORTS")]
    pub node_ports: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Start a mock fleet on loopback and print what a scan of it must find.
    Demo {
        /// Fleet manifest (TOML); a small mixed fleet when omitted.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Also scan the fleet and compare against the prediction.
        #[arg(long)]
        scan: bool,
        #[arg(short = 'e', long = "extended")]
        extended: bool,
    },
}

enum Failure {
    Usage(String),
    Fatal(String),
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Options(e) => Failure::Usage(e.to_string()),
            other => Failure::Fatal(other.to_string()),
        }
    }
}

fn target_failure(e: TargetError) -> Failure {
    match e {
        TargetError::Io { .. } => Failure::Fatal(e.to_string()),
        other => Failure::Usage(other.to_string()),
    }
}

fn seconds(value: f64, what: &str) -> Result<Duration, Failure> {
    Duration::try_from_secs_f64(value)
        .map_err(|_| Failure::Usage(format!("invalid {what} {value}")))
}

/// Runs the tool and returns its exit code.
pub fn run<I, S>(
    args: I,
    stdin: &mut dyn Read,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    if args.len() <= 1 {
        let _ = writeln!(stdout, "{}", Cli::command().render_help());
        return EXIT_OK;
    }
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    let result = match &cli.command {
        Some(Command::Demo {
            manifest,
            scan,
            extended,
        }) => output::demo(manifest.as_deref(), *scan, *extended, stdout),
        None => scan(&cli, stdin, stdout),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}\n\n{}", Cli::command().render_usage());
            EXIT_USAGE
        }
        Err(Failure::Fatal(msg)) => {
            let _ = writeln!(stderr, "fatal: {msg}");
            EXIT_FATAL
        }
    }
}

fn whois_source(spec: &str) -> Result<Arc<dyn WhoisLookup>, Failure> {
    Ok(match spec {
        "bundled" => Arc::new(FixtureWhois::bundled()),
        "cymru" => Arc::new(CymruWhois::default()),
        path => {
            Arc::new(FixtureWhois::load(path.as_ref()).map_err(|e| Failure::Fatal(e.to_string()))?)
        }
    })
}

fn scan(cli: &Cli, stdin: &mut dyn Read, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let adapter_kind = cli.adapter.ok_or_else(|| {
        Failure::Usage("an adapter is required (-t ROS, SROS or IROUTERS)".into())
    })?;
    if cli.provider.is_some() && adapter_kind != AdapterKind::IRouters {
        return Err(Failure::Usage(
            "--provider only applies to -t IROUTERS".into(),
        ));
    }
    if cli.provider.is_some() && (cli.address.is_some() || cli.input.is_some()) {
        return Err(Failure::Usage("--provider replaces -a/-i".into()));
    }
    let ports = match &cli.ports {
        Some(p) => parse_ports(p).map_err(|e| Failure::Usage(e.to_string()))?,
        None => match adapter_kind {
            AdapterKind::Ros | AdapterKind::Sros => {
                PortSet::single(MASTER_PORT).expect("valid port")
            }
            AdapterKind::IRouters => PortSet::from_ports([80, 443]).expect("valid ports"),
        },
    };
    let options = ScanOptions {
        concurrency: cli.concurrency,
        rate: cli.rate,
        connect_timeout: seconds(cli.timeout, "timeout")?,
        extended: cli.extended,
        execution: if cli.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        },
    };
    options
        .validate()
        .map_err(|e| Failure::Usage(e.to_string()))?;

    let (targets, indexed): (Vec<SocketAddrV4>, bool) = if let Some(provider) = &cli.provider {
        if provider != "shodan" {
            return Err(Failure::Usage(format!("unknown provider {provider:?}")));
        }
        let mut client = ShodanProvider::from_env();
        if let Some(url) = &cli.provider_url {
            client = client.with_base_url(url);
        }
        let mut found = Vec::new();
        for vendor in Vendor::ALL {
            let hits = query_index(&client, &IndexQuery::for_vendor(vendor), cli.limit)
                .map_err(|e| Failure::Fatal(e.to_string()))?;
            for hit in hits {
                if !found.contains(&hit) {
                    found.push(hit);
                }
            }
        }
        (found, true)
    } else {
        let spec = if let Some(a) = &cli.address {
            parse_targets(a, TargetMode::Auto)
        } else if let Some(path) = &cli.input {
            parse_targets(&path.to_string_lossy(), TargetMode::File)
        } else {
            let mut text = String::new();
            stdin
                .read_to_string(&mut text)
                .map_err(|e| Failure::Fatal(format!("cannot read standard input: {e}")))?;
            parse_targets(&text, TargetMode::Stream)
        }
        .map_err(target_failure)?;
        (endpoints(&spec, &ports), false)
    };

    let adapter: Box<dyn crate::engine::Adapter> = match adapter_kind {
        AdapterKind::Ros => Box::new(RosAdapter::default()),
        AdapterKind::Sros => {
            let mut a = SrosAdapter::default();
            if let Some(p) = &cli.node_ports {
                a.extended_ports = parse_ports(p).map_err(|e| Failure::Usage(e.to_string()))?;
            }
            Box::new(a)
        }
        AdapterKind::IRouters => {
            let mut a = RouterAdapter::default()
                .with_attempt_delay(seconds(cli.attempt_delay, "attempt delay")?);
            if let Some(path) = &cli.credentials {
                a = a.with_credentials(
                    CredentialBook::load(path).map_err(|e| Failure::Fatal(e.to_string()))?,
                );
            }
            if let Some(w) = &cli.whois {
                a.whois = Some(whois_source(w)?);
            }
            Box::new(a)
        }
    };

    let started = now();
    let mut findings: Vec<Finding> = Vec::new();
    {
        let mut out = BufWriter::new(&mut *stdout);
        let mut sink = FnSink(|mut finding: Finding| {
            finding.indexed = indexed;
            out.write_all(describe_finding(&finding, options.extended).as_bytes())?;
            out.flush()?;
            findings.push(finding);
            Ok(())
        });
        Scanner::new(options.clone()).run(adapter.as_ref(), &targets, &mut sink)?;
    }
    let report = ScanReport::new(
        ReportMetadata {
            tool_version: crate::TOOL_VERSION.to_string(),
            started,
            finished: now(),
            adapter: adapter_kind,
            options,
        },
        findings,
    );
    if let Some(path) = &cli.output {
        let format = cli.format.unwrap_or_else(|| {
            if path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("json"))
            {
                Format::Json
            } else {
                Format::Csv
            }
        });
        let file = std::fs::File::create(path)
            .map_err(|e| Failure::Fatal(format!("cannot create {}: {e}", path.display())))?;
        write_report(&report, format, BufWriter::new(file))
            .map_err(|e| Failure::Fatal(e.to_string()))?;
    }
    Ok(EXIT_OK)
}

/// The fleet `demo` starts without a manifest: one of each kind of host.
pub fn default_demo_manifest() -> FleetManifest {
    use crate::mocknet::{
        CertPreset, CertSpec, DecoyKind, GraphPreset, GraphSpec, HostKind, RouterAuth, RouterConfig,
    };
    let decoy = |decoy, against| HostKind::Decoy { decoy, against };
    FleetManifest::default()
        .push(HostKind::RosMaster {
            graph: GraphSpec::Preset(GraphPreset::RosoutOnly),
        })
        .push(HostKind::RosMaster {
            graph: GraphSpec::Preset(GraphPreset::TalkerListener),
        })
        .push(decoy(DecoyKind::FaultingXmlrpc, AdapterKind::Ros))
        .push(decoy(DecoyKind::PlainHttp, AdapterKind::Ros))
        .push(decoy(DecoyKind::Closed, AdapterKind::Ros))
        .push(HostKind::SrosNode {
            cert: CertSpec::Preset(CertPreset::DemoMaster),
            chain_len: 1,
            request_client_cert: true,
        })
        .push(HostKind::SrosNode {
            cert: CertSpec::Preset(CertPreset::OrgMaster),
            chain_len: 3,
            request_client_cert: true,
        })
        .push(decoy(DecoyKind::Echo, AdapterKind::Sros))
        .push(HostKind::Router(RouterConfig {
            vendor: Vendor::Ewon,
            auth: RouterAuth::credentials("adm", "adm"),
        }))
        .push(HostKind::Router(RouterConfig {
            vendor: Vendor::Westermo,
            auth: RouterAuth::credentials("admin", "Str0ng-pass"),
        }))
        .push(HostKind::Router(RouterConfig {
            vendor: Vendor::MoxaV2,
            auth: RouterAuth::Open,
        }))
        .push(HostKind::Router(RouterConfig {
            vendor: Vendor::SierraWireless,
            auth: RouterAuth::credentials("user", "12345"),
        }))
        .push(decoy(DecoyKind::PlainHttp, AdapterKind::IRouters))
}

pub(crate) fn spawn_demo(manifest: &FleetManifest) -> Result<mocknet::Fleet, String> {
    mocknet::spawn_fleet(manifest).map_err(|e| e.to_string())
}
