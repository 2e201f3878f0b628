//! TLS 1.2 record and handshake framing: enough to build a ClientHello,
//! walk a server's first flight, and emit that flight from a mock server.
//! No cryptography happens here.

use std::io::{self, Read, Write};

use thiserror::Error;

pub const CONTENT_CHANGE_CIPHER_SPEC: u8 = 20;
pub const CONTENT_ALERT: u8 = 21;
pub const CONTENT_HANDSHAKE: u8 = 22;
pub const CONTENT_APPLICATION_DATA: u8 = 23;

pub const HS_CLIENT_HELLO: u8 = 1;
pub const HS_SERVER_HELLO: u8 = 2;
pub const HS_CERTIFICATE: u8 = 11;
pub const HS_SERVER_KEY_EXCHANGE: u8 = 12;
pub const HS_CERTIFICATE_REQUEST: u8 = 13;
pub const HS_SERVER_HELLO_DONE: u8 = 14;
pub const HS_CERTIFICATE_VERIFY: u8 = 15;
pub const HS_CLIENT_KEY_EXCHANGE: u8 = 16;
pub const HS_FINISHED: u8 = 20;

pub const TLS10: u16 = 0x0301;
pub const TLS12: u16 = 0x0303;
pub const TLS13: u16 = 0x0304;

const EXT_SUPPORTED_GROUPS: u16 = 0x000a;
const EXT_EC_POINT_FORMATS: u16 = 0x000b;
const EXT_SIGNATURE_ALGORITHMS: u16 = 0x000d;
const EXT_SUPPORTED_VERSIONS: u16 = 0x002b;
const EXT_RENEGOTIATION_INFO: u16 = 0xff01;

const MAX_RECORD: usize = 16384 + 2048;

/// Offered to servers: ECDHE/DHE/RSA with GCM and CBC, plus the
/// renegotiation SCSV.
pub const CLIENT_CIPHER_SUITES: &[u16] = &[
    0xc02f, 0xc030, 0xc02b, 0xc02c, 0x009e, 0x009f, 0xc027, 0xc028, 0xc013, 0xc014, 0xc009, 0xc00a,
    0x009c, 0x009d, 0x003c, 0x003d, 0x002f, 0x0035, 0x0033, 0x0039, 0x000a, 0x00ff,
];

const SIGNATURE_ALGORITHMS: &[u16] = &[
    0x0401, 0x0501, 0x0601, 0x0403, 0x0503, 0x0603, 0x0804, 0x0805, 0x0806, 0x0201, 0x0203,
];

#[derive(Debug, Error)]
pub enum TlsError {
    #[error("not a TLS endpoint: {0}")]
    NotTls(String),
    #[error("TLS alert (level {level}, description {description})")]
    Alert { level: u8, description: u8 },
    #[error("server negotiated TLS 1.3; its certificate is encrypted")]
    Tls13,
    #[error("TLS protocol error: {0}")]
    Protocol(String),
    #[error("connection closed during handshake")]
    Closed,
    #[error("{}", super::describe_io(.0))]
    Io(#[source] io::Error),
}

impl TlsError {
    pub fn is_timeout(&self) -> bool {
        matches!(self, TlsError::Io(e) if matches!(e.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub content_type: u8,
    pub version: u16,
    pub payload: Vec<u8>,
}

/// Reads one record, rejecting anything whose header is not TLS-shaped.
pub fn read_record<R: Read>(reader: &mut R) -> Result<Record, TlsError> {
    let mut header = [0u8; 5];
    let mut filled = 0;
    while filled < header.len() {
        match reader.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Err(TlsError::Closed),
            Ok(0) => {
                return Err(TlsError::NotTls(format!(
                    "short reply {:?}",
                    String::from_utf8_lossy(&header[..filled])
                )))
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(TlsError::Io(e)),
        }
    }
    let content_type = header[0];
    let version = u16::from_be_bytes([header[1], header[2]]);
    let len = u16::from_be_bytes([header[3], header[4]]) as usize;
    if !(CONTENT_CHANGE_CIPHER_SPEC..=CONTENT_APPLICATION_DATA).contains(&content_type)
        || header[1] != 3
        || len > MAX_RECORD
    {
        return Err(TlsError::NotTls(format!(
            "unexpected bytes {:?}",
            String::from_utf8_lossy(&header)
        )));
    }
    let mut payload = vec![0; len];
    reader
        .read_exact(&mut payload)
        .map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => TlsError::Closed,
            _ => TlsError::Io(e),
        })?;
    Ok(Record {
        content_type,
        version,
        payload,
    })
}

/// Writes `payload`, fragmenting into maximum-size records as needed.
pub fn write_records<W: Write>(
    writer: &mut W,
    content_type: u8,
    version: u16,
    payload: &[u8],
) -> io::Result<()> {
    let mut out = Vec::with_capacity(payload.len() + 16);
    for chunk in payload.chunks(16384) {
        out.push(content_type);
        out.extend_from_slice(&version.to_be_bytes());
        out.extend_from_slice(&(chunk.len() as u16).to_be_bytes());
        out.extend_from_slice(chunk);
    }
    writer.write_all(&out)
}

/// Reassembles handshake messages that may span or share records.
#[derive(Debug, Default)]
pub struct HandshakeBuffer {
    buf: Vec<u8>,
}

impl HandshakeBuffer {
    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Next complete `(type, body)` message, if buffered.
    pub fn next_message(&mut self) -> Option<(u8, Vec<u8>)> {
        if self.buf.len() < 4 {
            return None;
        }
        let len = u24(&self.buf[1..4]);
        if self.buf.len() < 4 + len {
            return None;
        }
        let msg_type = self.buf[0];
        let body = self.buf[4..4 + len].to_vec();
        self.buf.drain(..4 + len);
        Some((msg_type, body))
    }
}

fn u24(b: &[u8]) -> usize {
    (b[0] as usize) << 16 | (b[1] as usize) << 8 | b[2] as usize
}

fn put_u24(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&[(v >> 16) as u8, (v >> 8) as u8, v as u8]);
}

fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn vec16(body: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(body.len() + 2);
    put_u16(&mut out, body.len() as u16);
    out.extend_from_slice(body);
    out
}

fn extension(ext_type: u16, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    put_u16(&mut out, ext_type);
    out.extend(vec16(data));
    out
}

/// Frames a handshake message body with its type and 24-bit length.
pub fn handshake_message(msg_type: u8, body: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(body.len() + 4);
    out.push(msg_type);
    put_u24(&mut out, body.len());
    out.extend_from_slice(body);
    out
}

/// A TLS 1.2 ClientHello handshake message (not yet record-framed).
pub fn client_hello(random: [u8; 32]) -> Vec<u8> {
    let mut body = Vec::new();
    put_u16(&mut body, TLS12);
    body.extend_from_slice(&random);
    body.push(0);
    let suites: Vec<u8> = CLIENT_CIPHER_SUITES
        .iter()
        .flat_map(|s| s.to_be_bytes())
        .collect();
    body.extend(vec16(&suites));
    body.extend_from_slice(&[1, 0]);

    let mut exts = Vec::new();
    let groups: Vec<u8> = [0x001du16, 0x0017, 0x0018]
        .iter()
        .flat_map(|g| g.to_be_bytes())
        .collect();
    exts.extend(extension(EXT_SUPPORTED_GROUPS, &vec16(&groups)));
    exts.extend(extension(EXT_EC_POINT_FORMATS, &[1, 0]));
    let sigs: Vec<u8> = SIGNATURE_ALGORITHMS
        .iter()
        .flat_map(|s| s.to_be_bytes())
        .collect();
    exts.extend(extension(EXT_SIGNATURE_ALGORITHMS, &vec16(&sigs)));
    body.extend(vec16(&exts));
    handshake_message(HS_CLIENT_HELLO, &body)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], TlsError> {
        if self.pos + n > self.data.len() {
            return Err(TlsError::Protocol("truncated handshake message".into()));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, TlsError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, TlsError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u24(&mut self) -> Result<usize, TlsError> {
        Ok(u24(self.take(3)?))
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientHelloInfo {
    pub version: u16,
    pub cipher_suites: Vec<u16>,
    pub offers_tls13: bool,
}

pub fn parse_client_hello(body: &[u8]) -> Result<ClientHelloInfo, TlsError> {
    let mut c = Cursor::new(body);
    let version = c.u16()?;
    c.take(32)?;
    let sid = c.u8()? as usize;
    c.take(sid)?;
    let suites_len = c.u16()? as usize;
    let cipher_suites = c
        .take(suites_len)?
        .chunks(2)
        .map(|p| u16::from_be_bytes([p[0], p[1]]))
        .collect();
    let comp = c.u8()? as usize;
    c.take(comp)?;
    let mut offers_tls13 = false;
    if c.remaining() >= 2 {
        let ext_len = c.u16()? as usize;
        let mut e = Cursor::new(c.take(ext_len)?);
        while e.remaining() >= 4 {
            let ty = e.u16()?;
            let len = e.u16()? as usize;
            let data = e.take(len)?;
            if ty == EXT_SUPPORTED_VERSIONS && data.len() > 1 {
                offers_tls13 = data[1..]
                    .chunks(2)
                    .any(|v| v.len() == 2 && u16::from_be_bytes([v[0], v[1]]) == TLS13);
            }
        }
    }
    Ok(ClientHelloInfo {
        version,
        cipher_suites,
        offers_tls13,
    })
}

pub fn server_hello(random: [u8; 32], cipher: u16, tls13: bool) -> Vec<u8> {
    let mut body = Vec::new();
    put_u16(&mut body, TLS12);
    body.extend_from_slice(&random);
    body.push(0);
    put_u16(&mut body, cipher);
    body.push(0);
    let exts = if tls13 {
        extension(EXT_SUPPORTED_VERSIONS, &TLS13.to_be_bytes())
    } else {
        extension(EXT_RENEGOTIATION_INFO, &[0])
    };
    body.extend(vec16(&exts));
    handshake_message(HS_SERVER_HELLO, &body)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerHelloInfo {
    pub legacy_version: u16,
    pub cipher: u16,
    /// From the supported_versions extension when present.
    pub selected_version: Option<u16>,
}

impl ServerHelloInfo {
    pub fn negotiated(&self) -> u16 {
        self.selected_version.unwrap_or(self.legacy_version)
    }
}

pub fn parse_server_hello(body: &[u8]) -> Result<ServerHelloInfo, TlsError> {
    let mut c = Cursor::new(body);
    let legacy_version = c.u16()?;
    c.take(32)?;
    let sid = c.u8()? as usize;
    c.take(sid)?;
    let cipher = c.u16()?;
    c.u8()?;
    let mut selected_version = None;
    if c.remaining() >= 2 {
        let ext_len = c.u16()? as usize;
        let mut e = Cursor::new(c.take(ext_len)?);
        while e.remaining() >= 4 {
            let ty = e.u16()?;
            let len = e.u16()? as usize;
            let data = e.take(len)?;
            if ty == EXT_SUPPORTED_VERSIONS && data.len() == 2 {
                selected_version = Some(u16::from_be_bytes([data[0], data[1]]));
            }
        }
    }
    Ok(ServerHelloInfo {
        legacy_version,
        cipher,
        selected_version,
    })
}

pub fn certificate(chain: &[Vec<u8>]) -> Vec<u8> {
    let mut list = Vec::new();
    for der in chain {
        put_u24(&mut list, der.len());
        list.extend_from_slice(der);
    }
    let mut body = Vec::new();
    put_u24(&mut body, list.len());
    body.extend(list);
    handshake_message(HS_CERTIFICATE, &body)
}

pub fn parse_certificate(body: &[u8]) -> Result<Vec<Vec<u8>>, TlsError> {
    let mut c = Cursor::new(body);
    let total = c.u24()?;
    let mut list = Cursor::new(c.take(total)?);
    let mut chain = Vec::new();
    while list.remaining() > 0 {
        let len = list.u24()?;
        chain.push(list.take(len)?.to_vec());
    }
    Ok(chain)
}

pub fn certificate_request() -> Vec<u8> {
    let mut body = vec![2, 1, 64];
    let sigs: Vec<u8> = SIGNATURE_ALGORITHMS
        .iter()
        .flat_map(|s| s.to_be_bytes())
        .collect();
    body.extend(vec16(&sigs));
    put_u16(&mut body, 0);
    handshake_message(HS_CERTIFICATE_REQUEST, &body)
}

pub fn server_hello_done() -> Vec<u8> {
    handshake_message(HS_SERVER_HELLO_DONE, &[])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_hello_parses_back() {
        let msg = client_hello([7; 32]);
        let mut buf = HandshakeBuffer::default();
        buf.push(&msg);
        let (ty, body) = buf.next_message().unwrap();
        assert_eq!(ty, HS_CLIENT_HELLO);
        let info = parse_client_hello(&body).unwrap();
        assert_eq!(info.version, TLS12);
        assert_eq!(info.cipher_suites, CLIENT_CIPHER_SUITES);
        assert!(!info.offers_tls13);
    }

    #[test]
    fn messages_split_across_records() {
        let chain = vec![vec![1u8; 300], vec![2u8; 40]];
        let mut flight = server_hello([0; 32], 0x002f, false);
        flight.extend(certificate(&chain));
        flight.extend(server_hello_done());

        let mut buf = HandshakeBuffer::default();
        let mut seen = Vec::new();
        for piece in flight.chunks(37) {
            buf.push(piece);
            while let Some((ty, body)) = buf.next_message() {
                seen.push(ty);
                if ty == HS_CERTIFICATE {
                    assert_eq!(parse_certificate(&body).unwrap(), chain);
                }
            }
        }
        assert_eq!(
            seen,
            [HS_SERVER_HELLO, HS_CERTIFICATE, HS_SERVER_HELLO_DONE]
        );
    }

    #[test]
    fn server_hello_versions() {
        let mut buf = HandshakeBuffer::default();
        buf.push(&server_hello([0; 32], 0x1301, true));
        let (_, body) = buf.next_message().unwrap();
        assert_eq!(parse_server_hello(&body).unwrap().negotiated(), TLS13);

        buf.push(&server_hello([0; 32], 0x002f, false));
        let (_, body) = buf.next_message().unwrap();
        let info = parse_server_hello(&body).unwrap();
        assert_eq!(info.negotiated(), TLS12);
        assert_eq!(info.cipher, 0x002f);
    }

    #[test]
    fn record_framing() {
        let mut wire = Vec::new();
        write_records(&mut wire, CONTENT_HANDSHAKE, TLS12, &[9; 20000]).unwrap();
        let mut r = &wire[..];
        let a = read_record(&mut r).unwrap();
        let b = read_record(&mut r).unwrap();
        assert_eq!(a.payload.len() + b.payload.len(), 20000);
        assert!(matches!(read_record(&mut r), Err(TlsError::Closed)));
    }

    #[test]
    fn http_reply_is_not_tls() {
        let mut r = &b"HTTP/1.1 400 Bad Request\r\n\r\n"[..];
        assert!(matches!(read_record(&mut r), Err(TlsError::NotTls(_))));
    }
}
