use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PortError {
    #[error("empty port specification")]
    Empty,
    #[error("malformed port {0:?}")]
    Malformed(String),
    #[error("port {0} is outside 1-65535")]
    OutOfRange(u32),
    #[error("inverted port range {0}-{1}")]
    Inverted(u16, u16),
}

/// Strictly ascending set of TCP ports in `1..=65535`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u16>", into = "Vec<u16>")]
pub struct PortSet(Vec<u16>);

impl PortSet {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Every port, 1 through 65535.
    pub fn all() -> Self {
        Self((1..=u16::MAX).collect())
    }

    pub fn single(port: u16) -> Result<Self, PortError> {
        Self::from_ports([port])
    }

    pub fn from_ports(ports: impl IntoIterator<Item = u16>) -> Result<Self, PortError> {
        let set: BTreeSet<u16> = ports.into_iter().collect();
        if set.contains(&0) {
            return Err(PortError::OutOfRange(0));
        }
        Ok(Self(set.into_iter().collect()))
    }

    pub fn ports(&self) -> &[u16] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, port: u16) -> bool {
        self.0.binary_search(&port).is_ok()
    }
}

impl TryFrom<Vec<u16>> for PortSet {
    type Error = PortError;

    fn try_from(ports: Vec<u16>) -> Result<Self, Self::Error> {
        Self::from_ports(ports)
    }
}

impl From<PortSet> for Vec<u16> {
    fn from(set: PortSet) -> Self {
        set.0
    }
}

impl std::fmt::Display for PortSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Collapse consecutive runs back into N-M form.
        let mut first = true;
        let mut i = 0;
        while i < self.0.len() {
            let start = self.0[i];
            let mut end = start;
            while i + 1 < self.0.len() && self.0[i + 1] == end + 1 {
                end += 1;
                i += 1;
            }
            if !first {
                f.write_str(",")?;
            }
            first = false;
            if start == end {
                write!(f, "{start}")?;
            } else {
                write!(f, "{start}-{end}")?;
            }
            i += 1;
        }
        Ok(())
    }
}

/// Parses `"N"`, `"N-M"` or a comma-separated mixture of both.
pub fn parse_ports(spec: &str) -> Result<PortSet, PortError> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Err(PortError::Empty);
    }
    let mut set = BTreeSet::new();
    for part in spec.split(',') {
        let part = part.trim();
        match part.split_once('-') {
            Some((lo, hi)) => {
                let lo = parse_one(lo)?;
                let hi = parse_one(hi)?;
                if lo > hi {
                    return Err(PortError::Inverted(lo, hi));
                }
                set.extend(lo..=hi);
            }
            None => {
                set.insert(parse_one(part)?);
            }
        }
    }
    Ok(PortSet(set.into_iter().collect()))
}

fn parse_one(token: &str) -> Result<u16, PortError> {
    let token = token.trim();
    let value: u32 = token
        .parse()
        .map_err(|_| PortError::Malformed(token.to_string()))?;
    if value == 0 || value > u16::MAX as u32 {
        return Err(PortError::OutOfRange(value));
    }
    Ok(value as u16)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn range() {
        let set = parse_ports("11311-11320").unwrap();
        assert_eq!(set.len(), 10);
        assert_eq!(set.ports().first(), Some(&11311));
        assert_eq!(set.ports().last(), Some(&11320));
    }

    #[test]
    fn list() {
        assert_eq!(parse_ports("80,5001").unwrap().ports(), &[80, 5001]);
    }

    #[test]
    fn dedup_and_sort() {
        assert_eq!(parse_ports("443,443,80").unwrap().ports(), &[80, 443]);
        assert_eq!(parse_ports("5-7,6,1").unwrap().ports(), &[1, 5, 6, 7]);
    }

    #[test]
    fn errors() {
        assert_eq!(parse_ports("0"), Err(PortError::OutOfRange(0)));
        assert_eq!(parse_ports("65536"), Err(PortError::OutOfRange(65536)));
        assert_eq!(parse_ports("20-10"), Err(PortError::Inverted(20, 10)));
        assert_eq!(
            parse_ports("http"),
            Err(PortError::Malformed("http".into()))
        );
        assert_eq!(parse_ports(" "), Err(PortError::Empty));
    }

    #[test]
    fn all_ports() {
        let all = PortSet::all();
        assert_eq!(all.len(), 65535);
        assert!(all.contains(1) && all.contains(65535));
    }

    proptest! {
        #[test]
        fn normalized_and_displays_back(ports in proptest::collection::vec(1u16..=u16::MAX, 1..40)) {
            let text = ports.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",");
            let set = parse_ports(&text).unwrap();
            prop_assert!(set.ports().windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(parse_ports(&set.to_string()).unwrap(), set.clone());
            prop_assert_eq!(parse_ports(&text).unwrap(), set);
        }
    }
}
