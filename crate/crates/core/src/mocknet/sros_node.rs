use std::io::{self, Write};
use std::net::SocketAddrV4;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::certgen::{build_chain, MockCertSpec};
use super::server::{Conn, MockServer};
use crate::proto::tls;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrosNodeConfig {
    pub cert: MockCertSpec,
    #[serde(default = "one")]
    pub chain_len: usize,
    #[serde(default = "yes")]
    pub request_client_cert: bool,
    /// Answer as a TLS 1.3 server instead.
    #[serde(default)]
    pub tls13: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl SrosNodeConfig {
    pub fn new(cert: MockCertSpec) -> Self {
        Self {
            cert,
            chain_len: 1,
            request_client_cert: true,
            tls13: false,
        }
    }
}

/// What clients did after receiving the server's first flight.
#[derive(Debug, Default)]
pub struct HandshakeLog {
    client_hellos: AtomicUsize,
    client_certificates: AtomicUsize,
    key_exchanges: AtomicUsize,
    change_cipher_specs: AtomicUsize,
    finished_or_data: AtomicUsize,
}

impl HandshakeLog {
    pub fn client_hellos(&self) -> usize {
        self.client_hellos.load(Ordering::SeqCst)
    }

    pub fn client_certificates(&self) -> usize {
        self.client_certificates.load(Ordering::SeqCst)
    }

    pub fn key_exchanges(&self) -> usize {
        self.key_exchanges.load(Ordering::SeqCst)
    }

    /// ChangeCipherSpec, Finished or application data ever arrived.
    pub fn completed_handshakes(&self) -> usize {
        self.change_cipher_specs.load(Ordering::SeqCst)
            + self.finished_or_data.load(Ordering::SeqCst)
    }

    /// The client stopped right after ClientHello, every time.
    pub fn abstained(&self) -> bool {
        self.client_certificates() == 0
            && self.key_exchanges() == 0
            && self.completed_handshakes() == 0
    }
}

pub struct SrosNodeMock {
    pub server: MockServer,
    pub log: Arc<HandshakeLog>,
    pub config: SrosNodeConfig,
}

impl SrosNodeMock {
    pub fn spawn(bind: SocketAddrV4, config: SrosNodeConfig) -> io::Result<Self> {
        let log = Arc::new(HandshakeLog::default());
        let chain = build_chain(&config.cert, config.chain_len);
        let handler = {
            let log = log.clone();
            let config = config.clone();
            Arc::new(move |conn: Conn| {
                let _ = serve(conn, &config, &chain, &log);
            })
        };
        Ok(Self {
            server: MockServer::spawn(bind, handler)?,
            log,
            config,
        })
    }

    pub fn addr(&self) -> SocketAddrV4 {
        self.server.addr()
    }
}

fn serve(
    mut conn: Conn,
    config: &SrosNodeConfig,
    chain: &[Vec<u8>],
    log: &HandshakeLog,
) -> Result<(), tls::TlsError> {
    let mut buffer = tls::HandshakeBuffer::default();
    let hello = loop {
        let record = tls::read_record(&mut conn.stream)?;
        if record.content_type != tls::CONTENT_HANDSHAKE {
            return Err(tls::TlsError::Protocol("expected handshake".into()));
        }
        buffer.push(&record.payload);
        if let Some((msg_type, body)) = buffer.next_message() {
            if msg_type != tls::HS_CLIENT_HELLO {
                return Err(tls::TlsError::Protocol("expected ClientHello".into()));
            }
            break tls::parse_client_hello(&body)?;
        }
    };
    log.client_hellos.fetch_add(1, Ordering::SeqCst);

    let random = [0x17; 32];
    let mut flight = Vec::new();
    if config.tls13 {
        if !hello.offers_tls13 {
            conn.release();
            // protocol_version alert
            return tls::write_records(&mut conn.stream, tls::CONTENT_ALERT, tls::TLS12, &[2, 70])
                .map_err(tls::TlsError::Io);
        }
        flight.extend(tls::server_hello(random, 0x1301, true));
    } else {
        flight.extend(tls::server_hello(random, 0x002f, false));
        flight.extend(tls::certificate(chain));
        if config.request_client_cert {
            flight.extend(tls::certificate_request());
        }
        flight.extend(tls::server_hello_done());
    }
    conn.release();
    tls::write_records(
        &mut conn.stream,
        tls::CONTENT_HANDSHAKE,
        tls::TLS12,
        &flight,
    )
    .map_err(tls::TlsError::Io)?;
    conn.stream.flush().map_err(tls::TlsError::Io)?;

    // Watch what the client does next until it hangs up.
    let mut buffer = tls::HandshakeBuffer::default();
    let mut encrypted = false;
    while let Ok(record) = tls::read_record(&mut conn.stream) {
        match record.content_type {
            tls::CONTENT_CHANGE_CIPHER_SPEC => {
                log.change_cipher_specs.fetch_add(1, Ordering::SeqCst);
                encrypted = true;
            }
            tls::CONTENT_APPLICATION_DATA => {
                log.finished_or_data.fetch_add(1, Ordering::SeqCst);
            }
            tls::CONTENT_HANDSHAKE if encrypted => {
                log.finished_or_data.fetch_add(1, Ordering::SeqCst);
            }
            tls::CONTENT_HANDSHAKE => {
                buffer.push(&record.payload);
                while let Some((msg_type, _)) = buffer.next_message() {
                    match msg_type {
                        tls::HS_CERTIFICATE => {
                            log.client_certificates.fetch_add(1, Ordering::SeqCst)
                        }
                        tls::HS_CLIENT_KEY_EXCHANGE => {
                            log.key_exchanges.fetch_add(1, Ordering::SeqCst)
                        }
                        tls::HS_FINISHED => log.finished_or_data.fetch_add(1, Ordering::SeqCst),
                        _ => 0,
                    };
                }
            }
            _ => {}
        }
    }
    Ok(())
}
