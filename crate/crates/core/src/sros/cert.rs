use serde::{Deserialize, Serialize};
use thiserror::Error;
use x509_parser::extensions::ParsedExtension;
use x509_parser::prelude::{FromDer, X509Certificate, X509Name};

use crate::proto::der;

pub type NameAttributes = Vec<(String, String)>;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("certificate does not parse: {0}")]
pub struct CertError(pub String);

/// One certificate-policies entry exactly as encoded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPolicy {
    /// Dotted-integer policy OID.
    pub oid: String,
    /// Qualifier payloads; string-typed qualifiers are unwrapped to their
    /// content bytes, anything else is kept as raw DER.
    #[serde(with = "super::bytes::many")]
    pub qualifiers: Vec<Vec<u8>>,
}

/// Leaf certificate grabbed from a server's handshake.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarvestedCertificate {
    pub subject: NameAttributes,
    pub issuer: NameAttributes,
    pub policies_raw: Vec<RawPolicy>,
    #[serde(with = "super::bytes::der")]
    pub der: Vec<u8>,
    /// Number of certificates the server sent.
    pub chain_len: usize,
    /// The server asked for a client certificate.
    pub client_cert_requested: bool,
}

impl HarvestedCertificate {
    pub fn from_der(der: &[u8]) -> Result<Self, CertError> {
        let (_, cert) = X509Certificate::from_der(der).map_err(|e| CertError(e.to_string()))?;
        let mut policies_raw = Vec::new();
        for ext in cert.extensions() {
            if let ParsedExtension::CertificatePolicies(policies) = ext.parsed_extension() {
                for info in policies {
                    policies_raw.push(RawPolicy {
                        oid: info.policy_id.to_id_string(),
                        qualifiers: info
                            .policy_qualifiers
                            .iter()
                            .flatten()
                            .map(|q| qualifier_bytes(q.qualifier))
                            .collect(),
                    });
                }
            }
        }
        Ok(Self {
            subject: name_attributes(cert.subject()),
            issuer: name_attributes(cert.issuer()),
            policies_raw,
            der: der.to_vec(),
            chain_len: 1,
            client_cert_requested: false,
        })
    }

    pub fn subject_attr(&self, key: &str) -> Option<&str> {
        lookup(&self.subject, key)
    }

    pub fn issuer_attr(&self, key: &str) -> Option<&str> {
        lookup(&self.issuer, key)
    }
}

fn lookup<'a>(attrs: &'a NameAttributes, key: &str) -> Option<&'a str> {
    attrs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
}

/// `/C=ZZ/ST=Sate/...` rendering.
pub fn format_name(attrs: &NameAttributes) -> String {
    attrs.iter().map(|(k, v)| format!("/{k}={v}")).collect()
}

fn short_name(oid: &str) -> String {
    match oid {
        "2.5.4.3" => "CN",
        "2.5.4.6" => "C",
        "2.5.4.7" => "L",
        "2.5.4.8" => "ST",
        "2.5.4.10" => "O",
        "2.5.4.11" => "OU",
        "1.2.840.113549.1.9.1" => "emailAddress",
        other => other,
    }
    .to_string()
}

fn name_attributes(name: &X509Name) -> NameAttributes {
    name.iter_attributes()
        .map(|attr| {
            let value = attr
                .as_str()
                .map(str::to_string)
                .unwrap_or_else(|_| String::from_utf8_lossy(attr.attr_value().data).into_owned());
            (short_name(&attr.attr_type().to_id_string()), value)
        })
        .collect()
}

const STRING_TAGS: &[u8] = &[
    der::TAG_UTF8_STRING,
    der::TAG_PRINTABLE_STRING,
    der::TAG_IA5_STRING,
    0x1a, // VisibleString
    0x1e, // BMPString
];

fn qualifier_bytes(raw: &[u8]) -> Vec<u8> {
    match der::read_tlv(raw) {
        Some((tag, content, rest)) if rest.is_empty() && STRING_TAGS.contains(&tag) => {
            content.to_vec()
        }
        _ => raw.to_vec(),
    }
}
