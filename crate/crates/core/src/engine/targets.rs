use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::net::Ipv4Addr;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest CIDR block we are willing to materialize (a /8).
const MIN_PREFIX_LEN: u8 = 8;

#[derive(Debug, Error)]
pub enum TargetError {
    #[error("malformed address {token:?} on line {line}")]
    Malformed { token: String, line: usize },
    #[error("malformed CIDR block {0:?}")]
    BadCidr(String),
    #[error("CIDR block {0:?} is too large (prefix must be at least /{MIN_PREFIX_LEN})")]
    TooLarge(String),
    #[error("cannot read target file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0:?} is not an address, CIDR block or readable file")]
    Unrecognized(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetSource {
    Cidr,
    Single,
    File,
    Stream,
}

/// How the target text passed to [`parse_targets`] is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMode {
    /// CIDR if it contains `/` and parses, a single address if it parses,
    /// otherwise a file path.
    Auto,
    Cidr,
    Single,
    /// The text is a path to a newline-delimited address list.
    File,
    /// The text is itself a newline-delimited address list.
    Stream,
}

/// Deduplicated, deterministically ordered IPv4 scan targets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpec {
    addresses: Vec<Ipv4Addr>,
    source: TargetSource,
}

impl TargetSpec {
    /// Builds a spec from arbitrary addresses, dropping repeats but keeping
    /// first-seen order.
    pub fn new(addresses: impl IntoIterator<Item = Ipv4Addr>, source: TargetSource) -> Self {
        let mut seen = HashSet::new();
        let addresses = addresses.into_iter().filter(|a| seen.insert(*a)).collect();
        Self { addresses, source }
    }

    pub fn addresses(&self) -> &[Ipv4Addr] {
        &self.addresses
    }

    pub fn source(&self) -> TargetSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.addresses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addresses.is_empty()
    }

    /// Reads one address per line (ZMap / nmap pipe output). Blank lines and
    /// `#` comments are skipped.
    pub fn from_reader<R: Read>(reader: R, source: TargetSource) -> Result<Self, TargetError> {
        let mut addresses = Vec::new();
        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|source| TargetError::Io {
                path: "<stream>".into(),
                source,
            })?;
            let token = line.trim();
            if token.is_empty() || token.starts_with('#') {
                continue;
            }
            let addr = token
                .parse::<Ipv4Addr>()
                .map_err(|_| TargetError::Malformed {
                    token: token.to_string(),
                    line: idx + 1,
                })?;
            addresses.push(addr);
        }
        Ok(Self::new(addresses, source))
    }
}

/// Expands a target expression into the full list of addresses to probe.
///
/// CIDR blocks include their network and broadcast addresses.
pub fn parse_targets(spec: &str, mode: TargetMode) -> Result<TargetSpec, TargetError> {
    match mode {
        TargetMode::Cidr => parse_cidr(spec.trim()),
        TargetMode::Single => parse_single(spec.trim()),
        TargetMode::File => parse_file(Path::new(spec.trim())),
        TargetMode::Stream => TargetSpec::from_reader(spec.as_bytes(), TargetSource::Stream),
        TargetMode::Auto => {
            let token = spec.trim();
            if token.contains('/') && token.split('/').next().is_some_and(looks_like_ipv4) {
                parse_cidr(token)
            } else if looks_like_ipv4(token) {
                parse_single(token)
            } else if Path::new(token).is_file() {
                parse_file(Path::new(token))
            } else {
                Err(TargetError::Unrecognized(token.to_string()))
            }
        }
    }
}

fn looks_like_ipv4(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| c.is_ascii_digit() || c == '.')
}

fn parse_single(token: &str) -> Result<TargetSpec, TargetError> {
    let addr = token
        .parse::<Ipv4Addr>()
        .map_err(|_| TargetError::Malformed {
            token: token.to_string(),
            line: 1,
        })?;
    Ok(TargetSpec::new([addr], TargetSource::Single))
}

fn parse_cidr(token: &str) -> Result<TargetSpec, TargetError> {
    let bad = || TargetError::BadCidr(token.to_string());
    let (base, prefix) = token.split_once('/').ok_or_else(bad)?;
    let base: Ipv4Addr = base.parse().map_err(|_| bad())?;
    let prefix: u8 = prefix.parse().map_err(|_| bad())?;
    if prefix > 32 {
        return Err(bad());
    }
    if prefix < MIN_PREFIX_LEN {
        return Err(TargetError::TooLarge(token.to_string()));
    }
    let mask = if prefix == 0 {
        0
    } else {
        u32::MAX << (32 - prefix)
    };
    let network = u32::from(base) & mask;
    let last = network | !mask;
    Ok(TargetSpec::new(
        (network..=last).map(Ipv4Addr::from),
        TargetSource::Cidr,
    ))
}

fn parse_file(path: &Path) -> Result<TargetSpec, TargetError> {
    let file = fs::File::open(path).map_err(|source| TargetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    TargetSpec::from_reader(file, TargetSource::File)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ips(spec: &TargetSpec) -> Vec<String> {
        spec.addresses().iter().map(|a| a.to_string()).collect()
    }

    #[test]
    fn single_address() {
        let spec = parse_targets("127.0.0.1", TargetMode::Auto).unwrap();
        assert_eq!(ips(&spec), ["127.0.0.1"]);
        assert_eq!(spec.source(), TargetSource::Single);
    }

    #[test]
    fn cidr_includes_network_and_broadcast() {
        let spec = parse_targets("192.168.1.0/30", TargetMode::Auto).unwrap();
        assert_eq!(
            ips(&spec),
            ["192.168.1.0", "192.168.1.1", "192.168.1.2", "192.168.1.3"]
        );
        assert_eq!(
            parse_targets("10.0.0.0/24", TargetMode::Cidr)
                .unwrap()
                .len(),
            256
        );
        assert_eq!(
            parse_targets("10.0.0.9/32", TargetMode::Cidr)
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn cidr_with_host_bits_is_normalized() {
        let spec = parse_targets("192.168.1.7/30", TargetMode::Cidr).unwrap();
        assert_eq!(ips(&spec)[0], "192.168.1.4");
    }

    #[test]
    fn stream_lines_skip_blanks() {
        let spec = parse_targets("10.0.0.1\n\n10.0.0.2\n", TargetMode::Stream).unwrap();
        assert_eq!(ips(&spec), ["10.0.0.1", "10.0.0.2"]);
        assert_eq!(spec.source(), TargetSource::Stream);
    }

    #[test]
    fn stream_deduplicates_keeping_first_order() {
        let spec = parse_targets("10.0.0.2\n10.0.0.1\n10.0.0.2\n", TargetMode::Stream).unwrap();
        assert_eq!(ips(&spec), ["10.0.0.2", "10.0.0.1"]);
    }

    #[test]
    fn malformed_line_is_reported_with_line_number() {
        let err = parse_targets("10.0.0.1\n10.0.0.300\n", TargetMode::Stream).unwrap_err();
        match err {
            TargetError::Malformed { token, line } => {
                assert_eq!(token, "10.0.0.300");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_stream_is_empty_spec() {
        assert!(parse_targets("\n\n", TargetMode::Stream)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn file_input_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hosts.txt");
        fs::write(&path, "192.0.2.1\n192.0.2.2\n").unwrap();
        let spec = parse_targets(path.to_str().unwrap(), TargetMode::Auto).unwrap();
        assert_eq!(spec.source(), TargetSource::File);
        assert_eq!(spec.len(), 2);

        let missing = dir.path().join("nope.txt");
        assert!(matches!(
            parse_targets(missing.to_str().unwrap(), TargetMode::File),
            Err(TargetError::Io { .. })
        ));
    }

    #[test]
    fn rejects_bad_cidr_and_oversized_blocks() {
        assert!(matches!(
            parse_targets("10.0.0.0/33", TargetMode::Auto),
            Err(TargetError::BadCidr(_))
        ));
        assert!(matches!(
            parse_targets("0.0.0.0/0", TargetMode::Auto),
            Err(TargetError::TooLarge(_))
        ));
        assert!(matches!(
            parse_targets("not-a-host", TargetMode::Auto),
            Err(TargetError::Unrecognized(_))
        ));
    }
}
