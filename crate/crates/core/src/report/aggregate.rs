use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::engine::{Finding, Payload};
use crate::enrichment::UNKNOWN_COUNTRY;
use crate::routers::Security;

pub const GRAND_TOTAL: &str = "Grand Total";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateKey {
    Country,
    Vendor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub key: String,
    pub total: u64,
    pub default_credentials: u64,
    pub changed_credentials: u64,
    pub proportion: f64,
}

impl AggregateRow {
    fn new(key: String, total: u64, default_credentials: u64) -> Self {
        Self {
            key,
            total,
            default_credentials,
            changed_credentials: total - default_credentials,
            proportion: if total == 0 {
                0.0
            } else {
                default_credentials as f64 / total as f64
            },
        }
    }

    /// Proportion as a whole percentage, rounded half away from zero.
    pub fn percent(&self) -> u64 {
        (self.proportion * 100.0).round() as u64
    }
}

/// Router findings grouped by country or manufacturer. Open consoles count
/// as default credentials. Rows come sorted by total, largest first, and
/// end with a grand-total row.
pub fn aggregate(findings: &[Finding], key: AggregateKey) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for f in findings {
        let Payload::Router(r) = &f.payload else {
            continue;
        };
        let k = match key {
            AggregateKey::Vendor => r.model.vendor.manufacturer().to_string(),
            AggregateKey::Country => r
                .enrichment
                .as_ref()
                .map(|e| e.country.clone())
                .unwrap_or_else(|| UNKNOWN_COUNTRY.to_string()),
        };
        let entry = groups.entry(k).or_default();
        entry.0 += 1;
        if r.security == Security::NotSecure {
            entry.1 += 1;
        }
    }
    let mut rows: Vec<AggregateRow> = groups
        .into_iter()
        .map(|(k, (total, default))| AggregateRow::new(k, total, default))
        .collect();
    rows.sort_by(|a, b| b.total.cmp(&a.total).then_with(|| a.key.cmp(&b.key)));
    let total = rows.iter().map(|r| r.total).sum();
    let default = rows.iter().map(|r| r.default_credentials).sum();
    rows.push(AggregateRow::new(GRAND_TOTAL.to_string(), total, default));
    rows
}

/// Aggregate table with proportions as whole percentages.
pub fn write_aggregate_csv<W: Write>(
    rows: &[AggregateRow],
    destination: W,
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(destination);
    w.write_record([
        "key",
        "routers",
        "default_credentials",
        "changed_credentials",
        "proportion",
    ])?;
    for r in rows {
        w.write_record([
            r.key.clone(),
            r.total.to_string(),
            r.default_credentials.to_string(),
            r.changed_credentials.to_string(),
            format!("{}%", r.percent()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Targets that came from an index query versus those that answered.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub detected: u64,
    pub alive: u64,
}

pub fn detection_summary(findings: &[Finding]) -> DetectionSummary {
    let mut s = DetectionSummary::default();
    for f in findings.iter().filter(|f| f.indexed) {
        s.detected += 1;
        if f.is_positive() {
            s.alive += 1;
        }
    }
    s
}
