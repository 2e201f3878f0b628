use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vendor {
    Westermo,
    Ewon,
    MoxaV1,
    MoxaV2,
    SierraWireless,
}

impl Vendor {
    pub const ALL: [Vendor; 5] = [
        Vendor::Westermo,
        Vendor::Ewon,
        Vendor::MoxaV1,
        Vendor::MoxaV2,
        Vendor::SierraWireless,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Vendor::Westermo => "westermo",
            Vendor::Ewon => "ewon",
            Vendor::MoxaV1 => "moxa_v1",
            Vendor::MoxaV2 => "moxa_v2",
            Vendor::SierraWireless => "sierra_wireless",
        }
    }

    /// Credential-list key; both Moxa console generations share one list.
    pub fn family(self) -> &'static str {
        match self {
            Vendor::MoxaV1 | Vendor::MoxaV2 => "moxa",
            other => other.as_str(),
        }
    }

    /// Manufacturer name used for aggregation.
    pub fn manufacturer(self) -> &'static str {
        match self {
            Vendor::Westermo => "Westermo",
            Vendor::Ewon => "Ewon",
            Vendor::MoxaV1 | Vendor::MoxaV2 => "Moxa",
            Vendor::SierraWireless => "Sierra Wireless",
        }
    }

    /// Name printed in progress lines.
    pub fn display_name(self) -> &'static str {
        match self {
            Vendor::Ewon => "eWON",
            other => other.manufacturer(),
        }
    }
}

impl std::fmt::Display for Vendor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Vendor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Vendor::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown router vendor {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RouterModel {
    pub vendor: Vendor,
    /// Header that matched and its value.
    pub signature_header: (String, String),
}

fn header<'a>(headers: &'a [(String, String)], name: &str) -> Option<&'a str> {
    headers
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case(name))
        .map(|(_, v)| v.as_str())
}

fn model(vendor: Vendor, name: &str, value: &str) -> Option<RouterModel> {
    Some(RouterModel {
        vendor,
        signature_header: (name.to_string(), value.to_string()),
    })
}

/// Matches response headers against the vendor signatures, checking
/// Westermo, eWON, Moxa and Sierra Wireless in that order.
///
/// The Sierra Wireless signature (an `ACEmanager` or `Sierra` Server
/// header) has not been checked against real devices.
pub fn identify_router(headers: &[(String, String)]) -> Option<RouterModel> {
    if let Some(v) = header(headers, "WWW-Authenticate") {
        if v.contains("Westermo") {
            return model(Vendor::Westermo, "WWW-Authenticate", v);
        }
    }
    let server = header(headers, "Server")?;
    match server.trim() {
        "eWON" => model(Vendor::Ewon, "Server", server),
        "MoxaHttp/1.0" => model(Vendor::MoxaV1, "Server", server),
        "MoxaHttp/2.2" => model(Vendor::MoxaV2, "Server", server),
        s if s.contains("ACEmanager") || s.contains("Sierra") => {
            model(Vendor::SierraWireless, "Server", server)
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(name: &str, value: &str) -> Vec<(String, String)> {
        vec![(name.to_string(), value.to_string())]
    }

    fn vendor(headers: Vec<(String, String)>) -> Option<Vendor> {
        identify_router(&headers).map(|m| m.vendor)
    }

    #[test]
    fn signatures() {
        assert_eq!(
            vendor(h("WWW-Authenticate", "Basic realm=\"Westermo ADSL-350\"")),
            Some(Vendor::Westermo)
        );
        assert_eq!(vendor(h("Server", "eWON")), Some(Vendor::Ewon));
        assert_eq!(vendor(h("Server", "MoxaHttp/1.0")), Some(Vendor::MoxaV1));
        assert_eq!(vendor(h("Server", "MoxaHttp/2.2")), Some(Vendor::MoxaV2));
        assert_eq!(
            vendor(h("Server", "Sierra Wireless ACEmanager")),
            Some(Vendor::SierraWireless)
        );
        assert_eq!(vendor(h("Server", "Apache/2.4.41")), None);
        assert_eq!(vendor(h("Server", "eWON-x")), None);
        assert_eq!(vendor(h("Server", "MoxaHttp/3.0")), None);
        assert_eq!(vendor(vec![]), None);
    }

    #[test]
    fn westermo_takes_precedence() {
        let headers = vec![
            ("Server".to_string(), "eWON".to_string()),
            (
                "WWW-Authenticate".to_string(),
                "Basic realm=\"Westermo\"".to_string(),
            ),
        ];
        assert_eq!(vendor(headers), Some(Vendor::Westermo));
    }

    #[test]
    fn header_names_are_case_insensitive() {
        assert_eq!(vendor(h("server", "eWON")), Some(Vendor::Ewon));
    }
}
