use std::io::{BufRead, BufReader, Write};
use std::net::{Ipv4Addr, SocketAddr, TcpStream, ToSocketAddrs};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Country code for addresses nobody knows about.
pub const UNKNOWN_COUNTRY: &str = "??";

const BUNDLED: &str = include_str!("../../data/whois_fixture.toml");
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrichmentRecord {
    pub address: Ipv4Addr,
    /// ISO 3166 alpha-2, or `??`.
    pub country: String,
    pub asn_description: String,
}

impl EnrichmentRecord {
    /// Anything that is not two uppercase letters becomes `??`.
    pub fn new(address: Ipv4Addr, country: &str, asn_description: &str) -> Self {
        let country = country.trim().to_ascii_uppercase();
        let country = if country.len() == 2 && country.bytes().all(|b| b.is_ascii_uppercase()) {
            country
        } else {
            UNKNOWN_COUNTRY.to_string()
        };
        Self {
            address,
            country,
            asn_description: asn_description.trim().to_string(),
        }
    }

    pub fn unknown(address: Ipv4Addr) -> Self {
        Self::new(address, UNKNOWN_COUNTRY, "")
    }
}

/// Country/ASN source. Misses come back as [`EnrichmentRecord::unknown`].
pub trait WhoisLookup: Send + Sync {
    fn lookup(&self, address: Ipv4Addr) -> EnrichmentRecord;
}

pub fn lookup_whois(address: Ipv4Addr, database: &dyn WhoisLookup) -> EnrichmentRecord {
    database.lookup(address)
}

/// Looks up each address in order.
pub fn lookup_batch(addresses: &[Ipv4Addr], database: &dyn WhoisLookup) -> Vec<EnrichmentRecord> {
    addresses.iter().map(|a| database.lookup(*a)).collect()
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad whois table: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported whois table version {0}")]
    Version(u32),
    #[error("bad prefix {0:?}")]
    Prefix(String),
}

#[derive(Deserialize)]
struct File {
    version: u32,
    #[serde(default)]
    entry: Vec<Entry>,
}

#[derive(Deserialize)]
struct Entry {
    prefix: String,
    country: String,
    asn: String,
}

/// Offline table keyed by address prefix; the longest match wins.
#[derive(Debug, Clone, Default)]
pub struct FixtureWhois {
    entries: Vec<(u32, u8, String, String)>,
}

impl FixtureWhois {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled whois table is valid")
    }

    pub fn parse(text: &str) -> Result<Self, FixtureError> {
        let file: File = toml::from_str(text)?;
        if file.version != FORMAT_VERSION {
            return Err(FixtureError::Version(file.version));
        }
        let mut table = Self::default();
        for e in file.entry {
            let (net, len) =
                parse_prefix(&e.prefix).ok_or(FixtureError::Prefix(e.prefix.clone()))?;
            table.insert(net, len, &e.country, &e.asn);
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, FixtureError> {
        let text = std::fs::read_to_string(path).map_err(|source| FixtureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn insert(&mut self, network: Ipv4Addr, prefix_len: u8, country: &str, asn: &str) {
        let mask = mask(prefix_len);
        self.entries.push((
            u32::from(network) & mask,
            prefix_len,
            country.to_string(),
            asn.to_string(),
        ));
    }
}

fn mask(len: u8) -> u32 {
    if len == 0 {
        0
    } else {
        u32::MAX << (32 - len.min(32) as u32)
    }
}

fn parse_prefix(s: &str) -> Option<(Ipv4Addr, u8)> {
    match s.split_once('/') {
        Some((addr, len)) => {
            let len: u8 = len.parse().ok()?;
            (len <= 32).then_some(())?;
            Some((addr.parse().ok()?, len))
        }
        None => Some((s.parse().ok()?, 32)),
    }
}

impl WhoisLookup for FixtureWhois {
    fn lookup(&self, address: Ipv4Addr) -> EnrichmentRecord {
        let ip = u32::from(address);
        self.entries
            .iter()
            .filter(|(net, len, _, _)| ip & mask(*len) == *net)
            .max_by_key(|(_, len, _, _)| *len)
            .map(|(_, _, c, a)| EnrichmentRecord::new(address, c, a))
            .unwrap_or_else(|| EnrichmentRecord::unknown(address))
    }
}

/// Live lookups against Team Cymru's IP-to-ASN whois service.
#[derive(Debug, Clone)]
pub struct CymruWhois {
    pub server: String,
    pub timeout: Duration,
}

impl Default for CymruWhois {
    fn default() -> Self {
        Self {
            server: "whois.cymru.com:43".into(),
            timeout: Duration::from_secs(10),
        }
    }
}

impl CymruWhois {
    fn query(&self, address: Ipv4Addr) -> std::io::Result<String> {
        let addr: SocketAddr = self
            .server
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::NotFound, "no address"))?;
        let mut stream = TcpStream::connect_timeout(&addr, self.timeout)?;
        stream.set_read_timeout(Some(self.timeout))?;
        write!(stream, "begin\nverbose\n{address}\nend\n")?;
        let mut out = String::new();
        for line in BufReader::new(stream).lines() {
            out.push_str(&line?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Pulls country and AS name out of a verbose bulk-mode reply:
/// `AS | IP | BGP Prefix | CC | Registry | Allocated | AS Name`.
pub fn parse_cymru_reply(address: Ipv4Addr, reply: &str) -> EnrichmentRecord {
    reply
        .lines()
        .filter(|l| !l.starts_with("Bulk mode") && !l.starts_with("AS "))
        .map(|l| l.split('|').map(str::trim).collect::<Vec<_>>())
        .find(|cols| cols.len() >= 7 && cols[1] == address.to_string())
        .map(|cols| EnrichmentRecord::new(address, cols[3], cols[6]))
        .unwrap_or_else(|| EnrichmentRecord::unknown(address))
}

impl WhoisLookup for CymruWhois {
    fn lookup(&self, address: Ipv4Addr) -> EnrichmentRecord {
        match self.query(address) {
            Ok(reply) => parse_cymru_reply(address, &reply),
            Err(_) => EnrichmentRecord::unknown(address),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_hit_and_miss() {
        let db = FixtureWhois::bundled();
        let hit = lookup_whois("192.0.2.1".parse().unwrap(), &db);
        assert_eq!(
            (hit.country.as_str(), hit.asn_description.as_str()),
            ("US", "EXAMPLE-ASN")
        );
        let miss = lookup_whois("10.9.9.9".parse().unwrap(), &db);
        assert_eq!(
            (miss.country.as_str(), miss.asn_description.as_str()),
            ("??", "")
        );
    }

    #[test]
    fn longest_prefix_wins() {
        let mut db = FixtureWhois::default();
        db.insert("10.0.0.0".parse().unwrap(), 8, "FR", "WIDE");
        db.insert("10.1.0.0".parse().unwrap(), 16, "IT", "NARROW");
        assert_eq!(db.lookup("10.1.2.3".parse().unwrap()).country, "IT");
        assert_eq!(db.lookup("10.2.2.3".parse().unwrap()).country, "FR");
    }

    #[test]
    fn batch_keeps_order() {
        let db = FixtureWhois::bundled();
        let addrs: Vec<Ipv4Addr> = ["203.0.113.9", "192.0.2.7", "198.51.100.1"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let recs = lookup_batch(&addrs, &db);
        assert_eq!(recs.iter().map(|r| r.address).collect::<Vec<_>>(), addrs);
        assert_eq!(
            recs.iter().map(|r| r.country.as_str()).collect::<Vec<_>>(),
            ["ES", "US", "DE"]
        );
    }

    #[test]
    fn country_is_normalized() {
        let a = Ipv4Addr::LOCALHOST;
        assert_eq!(EnrichmentRecord::new(a, "us", "x").country, "US");
        assert_eq!(EnrichmentRecord::new(a, "USA", "x").country, "??");
        assert_eq!(EnrichmentRecord::new(a, "", "x").country, "??");
    }

    #[test]
    fn cymru_reply() {
        let reply = "Bulk mode; whois.cymru.com [2024-01-01 00:00:00 +0000]\n\
            15169   | 8.8.8.8          | 8.8.8.0/24          | US | arin     | 2023-12-28 | GOOGLE, US\n";
        let rec = parse_cymru_reply("8.8.8.8".parse().unwrap(), reply);
        assert_eq!(rec.country, "US");
        assert_eq!(rec.asn_description, "GOOGLE, US");
    }
}
