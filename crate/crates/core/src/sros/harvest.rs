use std::io::Write;
use std::net::{Shutdown, SocketAddrV4};
use std::time::Duration;

use rand::RngCore;
use thiserror::Error;

use super::cert::HarvestedCertificate;
use crate::proto::{self, tls};

const PROTOCOL_VERSION_ALERT: u8 = 70;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HarvestError {
    #[error("{0}")]
    Unreachable(String),
    #[error("not a TLS endpoint: {0}")]
    NotTls(String),
    #[error("server negotiated TLS 1.3; certificate is encrypted")]
    Tls13,
    #[error("TLS alert {description} (level {level})")]
    Alert { level: u8, description: u8 },
    #[error("TLS protocol error: {0}")]
    Protocol(String),
    #[error("handshake finished without a server certificate")]
    NoCertificate,
    #[error("{0}")]
    BadCertificate(String),
}

impl HarvestError {
    pub fn verdict(&self) -> &'static str {
        match self {
            HarvestError::Unreachable(_) => "unreachable",
            HarvestError::NotTls(_) => "not_tls",
            HarvestError::Tls13 => "tls13_unsupported",
            HarvestError::Alert { .. } => "tls_alert",
            HarvestError::Protocol(_) => "protocol_error",
            HarvestError::NoCertificate => "no_certificate",
            HarvestError::BadCertificate(_) => "bad_certificate",
        }
    }

    /// The port had nothing listening, so an extended sweep can skip it.
    pub fn is_refused(&self) -> bool {
        matches!(self, HarvestError::Unreachable(d) if d == "Connection refused")
    }
}

impl From<tls::TlsError> for HarvestError {
    fn from(err: tls::TlsError) -> Self {
        match err {
            e if e.is_timeout() => HarvestError::Unreachable("Timed out".into()),
            tls::TlsError::NotTls(d) => HarvestError::NotTls(d),
            tls::TlsError::Alert { level, description } => {
                HarvestError::Alert { level, description }
            }
            tls::TlsError::Tls13 => HarvestError::Tls13,
            tls::TlsError::Protocol(d) => HarvestError::Protocol(d),
            tls::TlsError::Closed => {
                HarvestError::Protocol("connection closed during handshake".into())
            }
            tls::TlsError::Io(e) => HarvestError::Unreachable(proto::describe_io(&e)),
        }
    }
}

/// Sends a ClientHello, reads the server's first flight up to
/// ServerHelloDone and hangs up. Nothing else is ever written: no client
/// certificate, no key exchange, no Finished.
pub fn harvest_certificate(
    target: SocketAddrV4,
    timeout: Duration,
) -> Result<HarvestedCertificate, HarvestError> {
    let mut stream = proto::connect(target, timeout)
        .map_err(|e| HarvestError::Unreachable(proto::describe_io(&e)))?;
    let mut random = [0u8; 32];
    rand::thread_rng().fill_bytes(&mut random);
    let hello = tls::client_hello(random);
    tls::write_records(&mut stream, tls::CONTENT_HANDSHAKE, tls::TLS10, &hello)
        .and_then(|_| stream.flush())
        .map_err(|e| HarvestError::Unreachable(proto::describe_io(&e)))?;

    let flight = read_flight(&mut stream);
    let _ = stream.shutdown(Shutdown::Both);
    let flight = flight?;
    let leaf = flight.chain.first().ok_or(HarvestError::NoCertificate)?;
    let mut cert = HarvestedCertificate::from_der(leaf)
        .map_err(|e| HarvestError::BadCertificate(e.to_string()))?;
    cert.chain_len = flight.chain.len();
    cert.client_cert_requested = flight.certificate_requested;
    Ok(cert)
}

#[derive(Default)]
struct Flight {
    saw_server_hello: bool,
    chain: Vec<Vec<u8>>,
    certificate_requested: bool,
}

fn read_flight<R: std::io::Read>(stream: &mut R) -> Result<Flight, HarvestError> {
    let mut flight = Flight::default();
    let mut buffer = tls::HandshakeBuffer::default();
    loop {
        let record = match tls::read_record(stream) {
            Ok(r) => r,
            // Some servers hang up right after the chain; what we have is enough.
            Err(_) if !flight.chain.is_empty() => return Ok(flight),
            Err(e) => return Err(e.into()),
        };
        match record.content_type {
            tls::CONTENT_HANDSHAKE => buffer.push(&record.payload),
            tls::CONTENT_ALERT if !flight.chain.is_empty() => return Ok(flight),
            tls::CONTENT_ALERT => {
                let level = record.payload.first().copied().unwrap_or(0);
                let description = record.payload.get(1).copied().unwrap_or(0);
                // protocol_version: the server will not speak TLS 1.2.
                if description == PROTOCOL_VERSION_ALERT {
                    return Err(HarvestError::Tls13);
                }
                return Err(HarvestError::Alert { level, description });
            }
            _ if !flight.chain.is_empty() => return Ok(flight),
            other => {
                return Err(HarvestError::Protocol(format!(
                    "unexpected record type {other}"
                )))
            }
        }
        while let Some((msg_type, body)) = buffer.next_message() {
            match msg_type {
                tls::HS_SERVER_HELLO if !flight.saw_server_hello => {
                    let hello = tls::parse_server_hello(&body)?;
                    if hello.negotiated() == tls::TLS13 {
                        return Err(HarvestError::Tls13);
                    }
                    flight.saw_server_hello = true;
                }
                _ if !flight.saw_server_hello => {
                    return Err(HarvestError::Protocol(format!(
                        "expected ServerHello, got handshake message {msg_type}"
                    )))
                }
                tls::HS_CERTIFICATE => flight.chain = tls::parse_certificate(&body)?,
                tls::HS_CERTIFICATE_REQUEST => flight.certificate_requested = true,
                tls::HS_SERVER_HELLO_DONE => return Ok(flight),
                tls::HS_SERVER_KEY_EXCHANGE => {}
                other => {
                    return Err(HarvestError::Protocol(format!(
                        "unexpected handshake message {other}"
                    )))
                }
            }
        }
    }
}
