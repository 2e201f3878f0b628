//! Report serialization and aggregate views.
//!
//! JSON keeps every finding losslessly. CSV is a flat, one-row-per-finding
//! summary with fixed columns, which is what spreadsheet filtering needs;
//! it cannot be turned back into full findings, only into [`CsvRow`]s.

mod aggregate;

use std::io::{self, Read, Write};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{AdapterKind, Finding, Payload, ScanOptions};

pub use aggregate::{
    aggregate, detection_summary, write_aggregate_csv, AggregateKey, AggregateRow,
    DetectionSummary, GRAND_TOTAL,
};

pub const CSV_COLUMNS: [&str; 12] = [
    "timestamp",
    "adapter",
    "address",
    "port",
    "verdict",
    "detail",
    "vendor",
    "security",
    "credentials",
    "country",
    "asn",
    "nature",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!(
                "unknown report format {s:?} (expected csv or json)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool_version: String,
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
    pub adapter: AdapterKind,
    pub options: ScanOptions,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanReport {
    pub metadata: ReportMetadata,
    pub findings: Vec<Finding>,
}

impl ScanReport {
    pub fn new(metadata: ReportMetadata, findings: Vec<Finding>) -> Self {
        Self { metadata, findings }
    }

    /// Findings in serialization order: address, port, then tie-breakers
    /// that make the order total.
    pub fn sorted_findings(&self) -> Vec<&Finding> {
        let mut keyed: Vec<_> = self
            .findings
            .iter()
            .map(|f| (serde_json::to_string(f).unwrap_or_default(), f))
            .collect();
        keyed.sort_by(|(ja, a), (jb, b)| {
            (a.target.ip(), a.target.port(), a.adapter, a.timestamp, ja).cmp(&(
                b.target.ip(),
                b.target.port(),
                b.adapter,
                b.timestamp,
                jb,
            ))
        });
        keyed.into_iter().map(|(_, f)| f).collect()
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report write failed: {0}")]
    Io(#[from] io::Error),
    #[error("bad JSON report: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad CSV report: {0}")]
    Csv(#[from] csv::Error),
    #[error("CSV header mismatch: {0}")]
    Header(String),
}

struct Counting<W> {
    inner: W,
    written: u64,
}

impl<W: Write> Write for Counting<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.written += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Writes `report` and returns the number of bytes written. The output
/// depends only on the report's content, not on finding arrival order.
pub fn write_report<W: Write>(
    report: &ScanReport,
    format: Format,
    destination: W,
) -> Result<u64, ReportError> {
    let mut out = Counting {
        inner: destination,
        written: 0,
    };
    match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                metadata: &'a ReportMetadata,
                findings: Vec<&'a Finding>,
            }
            let doc = Doc {
                metadata: &report.metadata,
                findings: report.sorted_findings(),
            };
            serde_json::to_writer_pretty(&mut out, &doc)?;
            out.write_all(b"\n")?;
        }
        Format::Csv => {
            let rows: Vec<CsvRow> = report
                .sorted_findings()
                .into_iter()
                .map(CsvRow::from_finding)
                .collect();
            write_csv_rows(&rows, &mut out)?;
        }
    }
    out.flush()?;
    Ok(out.written)
}

pub fn parse_json<R: Read>(source: R) -> Result<ScanReport, ReportError> {
    Ok(serde_json::from_reader(source)?)
}

/// One CSV line. Empty strings stand for "not applicable".
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvRow {
    pub timestamp: String,
    pub adapter: String,
    pub address: String,
    pub port: String,
    pub verdict: String,
    pub detail: String,
    pub vendor: String,
    pub security: String,
    pub credentials: String,
    pub country: String,
    pub asn: String,
    pub nature: String,
}

impl CsvRow {
    pub fn from_finding(f: &Finding) -> Self {
        let mut row = CsvRow {
            timestamp: f.timestamp.to_rfc3339_opts(SecondsFormat::Micros, true),
            adapter: f.adapter.as_str().to_string(),
            address: f.target.ip().to_string(),
            port: f.target.port().to_string(),
            ..Default::default()
        };
        match &f.payload {
            Payload::Negative(n) => {
                row.verdict = n.verdict.clone();
                row.detail = n.detail.clone();
            }
            Payload::Ros(host) => {
                row.verdict = "ros_host".into();
                if let Some(state) = &host.state {
                    row.detail = format!(
                        "nodes={} topics={} services={} communications={}",
                        state.nodes.len(),
                        state.topics.len(),
                        state.services.len(),
                        state.communications.len()
                    );
                }
                row.nature = host
                    .nature
                    .map(|n| n.as_str().to_string())
                    .unwrap_or_default();
            }
            Payload::Sros(host) => {
                row.verdict = "sros_host".into();
                let identified = host.nodes.iter().filter(|n| n.identity.is_some()).count();
                row.detail = format!(
                    "node={} demo_ca={} nodes={identified}",
                    host.master.node_name, host.master.demo_ca
                );
            }
            Payload::Router(r) => {
                row.verdict = "router".into();
                row.detail = format!(
                    "{}: {}",
                    r.model.signature_header.0, r.model.signature_header.1
                );
                row.vendor = r.model.vendor.as_str().to_string();
                row.security = r.security.as_str().to_string();
                row.credentials = match (&r.winning_credentials, r.open_access) {
                    (Some(c), _) => format!("{}:{}", c.username, c.password),
                    (None, true) => "open".into(),
                    (None, false) => String::new(),
                };
                if let Some(e) = &r.enrichment {
                    row.country = e.country.clone();
                    row.asn = e.asn_description.clone();
                }
            }
        }
        row
    }
}

pub fn write_csv_rows<W: Write>(rows: &[CsvRow], destination: W) -> Result<(), ReportError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(destination);
    w.write_record(CSV_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_csv<R: Read>(source: R) -> Result<Vec<CsvRow>, ReportError> {
    let mut r = csv::Reader::from_reader(source);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(ReportError::Header(header.join(",")));
    }
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::NegativeProbe;

    fn meta() -> ReportMetadata {
        let t = "2024-01-01T00:00:00Z".parse().unwrap();
        ReportMetadata {
            tool_version: "test".into(),
            started: t,
            finished: t,
            adapter: AdapterKind::Ros,
            options: ScanOptions::default(),
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        let mut buf = Vec::new();
        let n = write_report(&ScanReport::new(meta(), vec![]), Format::Csv, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            format!("{}\n", CSV_COLUMNS.join(","))
        );
        assert_eq!(n as usize, CSV_COLUMNS.join(",").len() + 1);
    }

    #[test]
    fn negative_row() {
        let f = Finding::at(
            "10.0.0.1:11311".parse().unwrap(),
            AdapterKind::Ros,
            Payload::Negative(NegativeProbe::new("unreachable", "Connection refused")),
            "2024-01-01T00:00:00.5Z".parse().unwrap(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_report(&ScanReport::new(meta(), vec![f]), Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "2024-01-01T00:00:00.500000Z,ROS,10.0.0.1,11311,unreachable,Connection refused,,,,,,"
        );
        let rows = parse_csv(text.as_bytes()).unwrap();
        assert_eq!(rows[0].verdict, "unreachable");
    }

    #[test]
    fn csv_header_checked() {
        assert!(matches!(
            parse_csv("a,b\n".as_bytes()),
            Err(ReportError::Header(_))
        ));
    }
}
