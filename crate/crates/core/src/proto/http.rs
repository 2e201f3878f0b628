//! Just enough HTTP/1.1 for header grabbing and login flows, plus the
//! server-side parsing the mock consoles need.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::SocketAddrV4;
use std::time::Duration;

use base64::Engine;
use thiserror::Error;

const MAX_HEAD: usize = 64 * 1024;
const MAX_BODY: usize = 8 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("{}", super::describe_io(.0))]
    Connect(#[source] io::Error),
    #[error("{}", super::describe_io(.0))]
    Io(#[source] io::Error),
    #[error("malformed HTTP message: {0}")]
    Malformed(String),
}

impl HttpError {
    pub fn is_timeout(&self) -> bool {
        matches!(self, HttpError::Connect(e) | HttpError::Io(e)
            if matches!(e.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock))
    }

    /// The endpoint never accepted a connection.
    pub fn is_unreachable(&self) -> bool {
        matches!(self, HttpError::Connect(_)) || self.is_timeout()
    }
}

pub type Headers = Vec<(String, String)>;

fn find_header<'a>(headers: &'a Headers, name: &str) -> Option<&'a str> {
    headers
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case(name))
        .map(|(_, v)| v.as_str())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub method: String,
    /// Path plus optional query string.
    pub target: String,
    pub headers: Headers,
    pub body: Vec<u8>,
}

impl Request {
    pub fn new(method: &str, target: &str) -> Self {
        Self {
            method: method.to_string(),
            target: target.to_string(),
            headers: Vec::new(),
            body: Vec::new(),
        }
    }

    pub fn get(target: &str) -> Self {
        Self::new("GET", target)
    }

    pub fn post(target: &str, content_type: &str, body: impl Into<Vec<u8>>) -> Self {
        Self::new("POST", target)
            .header("Content-Type", content_type)
            .with_body(body)
    }

    pub fn header(mut self, name: &str, value: &str) -> Self {
        self.headers.push((name.to_string(), value.to_string()));
        self
    }

    pub fn with_body(mut self, body: impl Into<Vec<u8>>) -> Self {
        self.body = body.into();
        self
    }

    pub fn basic_auth(self, user: &str, password: &str) -> Self {
        let token = base64::engine::general_purpose::STANDARD.encode(format!("{user}:{password}"));
        self.header("Authorization", &format!("Basic {token}"))
    }

    pub fn header_value(&self, name: &str) -> Option<&str> {
        find_header(&self.headers, name)
    }

    /// Decoded `user:password` from a Basic `Authorization` header.
    pub fn basic_credentials(&self) -> Option<(String, String)> {
        let value = self.header_value("Authorization")?;
        let (scheme, token) = value.trim().split_once(' ')?;
        if !scheme.eq_ignore_ascii_case("basic") {
            return None;
        }
        let raw = base64::engine::general_purpose::STANDARD
            .decode(token.trim())
            .ok()?;
        let text = String::from_utf8(raw).ok()?;
        let (u, p) = text.split_once(':')?;
        Some((u.to_string(), p.to_string()))
    }

    pub fn path(&self) -> &str {
        self.target.split('?').next().unwrap_or("")
    }

    pub fn query(&self) -> Vec<(String, String)> {
        self.target
            .split_once('?')
            .map(|(_, q)| form_decode(q))
            .unwrap_or_default()
    }

    /// Serializes with `Host`, `Connection: close` and `Content-Length` added.
    pub fn to_bytes(&self, host: &str) -> Vec<u8> {
        let mut out = format!(
            "{} {} HTTP/1.1\r\nHost: {host}\r\n",
            self.method, self.target
        );
        for (k, v) in &self.headers {
            out.push_str(&format!("{k}: {v}\r\n"));
        }
        if self.header_value("Connection").is_none() {
            out.push_str("Connection: close\r\n");
        }
        if !self.body.is_empty() || self.method == "POST" {
            out.push_str(&format!("Content-Length: {}\r\n", self.body.len()));
        }
        out.push_str("\r\n");
        let mut bytes = out.into_bytes();
        bytes.extend_from_slice(&self.body);
        bytes
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub reason: String,
    pub headers: Headers,
    pub body: Vec<u8>,
}

impl Response {
    pub fn new(status: u16) -> Self {
        Self {
            status,
            reason: reason_phrase(status).to_string(),
            headers: Vec::new(),
            body: Vec::new(),
        }
    }

    pub fn header(mut self, name: &str, value: &str) -> Self {
        self.headers.push((name.to_string(), value.to_string()));
        self
    }

    pub fn with_body(mut self, body: impl Into<Vec<u8>>) -> Self {
        self.body = body.into();
        self
    }

    pub fn header_value(&self, name: &str) -> Option<&str> {
        find_header(&self.headers, name)
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!("HTTP/1.1 {} {}\r\n", self.status, self.reason);
        for (k, v) in &self.headers {
            out.push_str(&format!("{k}: {v}\r\n"));
        }
        out.push_str(&format!(
            "Content-Length: {}\r\nConnection: close\r\n\r\n",
            self.body.len()
        ));
        let mut bytes = out.into_bytes();
        bytes.extend_from_slice(&self.body);
        bytes
    }
}

fn reason_phrase(status: u16) -> &'static str {
    match status {
        200 => "OK",
        302 => "Redirect",
        400 => "Bad Request",
        401 => "Unauthorized",
        403 => "Forbidden",
        404 => "Not Found",
        405 => "Method Not Allowed",
        429 => "Too Many Requests",
        500 => "Internal Server Error",
        _ => "Status",
    }
}

fn read_line<R: BufRead>(reader: &mut R, budget: &mut usize) -> Result<Option<String>, HttpError> {
    let mut line = Vec::new();
    let n = reader
        .by_ref()
        .take(*budget as u64 + 1)
        .read_until(b'\n', &mut line)
        .map_err(HttpError::Io)?;
    if n == 0 {
        return Ok(None);
    }
    if n > *budget {
        return Err(HttpError::Malformed("header section too large".into()));
    }
    *budget -= n;
    while line.last().is_some_and(|b| *b == b'\n' || *b == b'\r') {
        line.pop();
    }
    Ok(Some(String::from_utf8_lossy(&line).into_owned()))
}

fn read_headers<R: BufRead>(reader: &mut R, budget: &mut usize) -> Result<Headers, HttpError> {
    let mut headers = Vec::new();
    loop {
        let line = read_line(reader, budget)?
            .ok_or_else(|| HttpError::Malformed("truncated headers".into()))?;
        if line.is_empty() {
            return Ok(headers);
        }
        let (k, v) = line
            .split_once(':')
            .ok_or_else(|| HttpError::Malformed(format!("bad header line {line:?}")))?;
        headers.push((k.trim().to_string(), v.trim().to_string()));
    }
}

fn read_exact_body<R: Read>(reader: &mut R, len: usize) -> Result<Vec<u8>, HttpError> {
    if len > MAX_BODY {
        return Err(HttpError::Malformed(format!(
            "body of {len} bytes too large"
        )));
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).map_err(HttpError::Io)?;
    Ok(body)
}

fn read_chunked<R: BufRead>(reader: &mut R) -> Result<Vec<u8>, HttpError> {
    let mut body = Vec::new();
    loop {
        let mut budget = MAX_HEAD;
        let line = read_line(reader, &mut budget)?
            .ok_or_else(|| HttpError::Malformed("truncated chunk".into()))?;
        let size_text = line.split(';').next().unwrap_or("").trim();
        let size = usize::from_str_radix(size_text, 16)
            .map_err(|_| HttpError::Malformed(format!("bad chunk size {size_text:?}")))?;
        if size == 0 {
            // Trailers, then the terminating blank line.
            while read_line(reader, &mut budget)?.is_some_and(|l| !l.is_empty()) {}
            return Ok(body);
        }
        if body.len() + size > MAX_BODY {
            return Err(HttpError::Malformed("chunked body too large".into()));
        }
        body.extend(read_exact_body(reader, size)?);
        read_line(reader, &mut budget)?;
    }
}

fn content_length(headers: &Headers) -> Result<Option<usize>, HttpError> {
    find_header(headers, "Content-Length")
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| HttpError::Malformed(format!("bad Content-Length {v:?}")))
        })
        .transpose()
}

/// Reads one request; `Ok(None)` when the peer closed before sending anything.
pub fn read_request<R: BufRead>(reader: &mut R) -> Result<Option<Request>, HttpError> {
    let mut budget = MAX_HEAD;
    let Some(line) = read_line(reader, &mut budget)? else {
        return Ok(None);
    };
    let mut parts = line.split_whitespace();
    let (Some(method), Some(target), Some(version)) = (parts.next(), parts.next(), parts.next())
    else {
        return Err(HttpError::Malformed(format!("bad request line {line:?}")));
    };
    if !version.starts_with("HTTP/") {
        return Err(HttpError::Malformed(format!("bad request line {line:?}")));
    }
    let headers = read_headers(reader, &mut budget)?;
    let body = if find_header(&headers, "Transfer-Encoding")
        .is_some_and(|v| v.eq_ignore_ascii_case("chunked"))
    {
        read_chunked(reader)?
    } else {
        read_exact_body(reader, content_length(&headers)?.unwrap_or(0))?
    };
    Ok(Some(Request {
        method: method.to_string(),
        target: target.to_string(),
        headers,
        body,
    }))
}

pub fn read_response<R: BufRead>(reader: &mut R) -> Result<Response, HttpError> {
    let mut budget = MAX_HEAD;
    let line = read_line(reader, &mut budget)?
        .ok_or_else(|| HttpError::Malformed("empty response".into()))?;
    let mut parts = line.splitn(3, ' ');
    let version = parts.next().unwrap_or("");
    if !version.starts_with("HTTP/") {
        return Err(HttpError::Malformed(format!("bad status line {line:?}")));
    }
    let status: u16 = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| HttpError::Malformed(format!("bad status line {line:?}")))?;
    let reason = parts.next().unwrap_or("").to_string();
    let headers = read_headers(reader, &mut budget)?;
    let body = if status == 204 || status == 304 || (100..200).contains(&status) {
        Vec::new()
    } else if find_header(&headers, "Transfer-Encoding")
        .is_some_and(|v| v.to_ascii_lowercase().contains("chunked"))
    {
        read_chunked(reader)?
    } else if let Some(len) = content_length(&headers)? {
        read_exact_body(reader, len)?
    } else {
        let mut body = Vec::new();
        reader
            .take(MAX_BODY as u64)
            .read_to_end(&mut body)
            .map_err(HttpError::Io)?;
        body
    };
    Ok(Response {
        status,
        reason,
        headers,
        body,
    })
}

/// Sends one request on a fresh connection and reads the full response.
pub fn send(
    addr: SocketAddrV4,
    request: &Request,
    timeout: Duration,
) -> Result<Response, HttpError> {
    let mut stream = super::connect(addr, timeout).map_err(HttpError::Connect)?;
    stream
        .write_all(&request.to_bytes(&addr.to_string()))
        .map_err(HttpError::Io)?;
    let mut reader = BufReader::new(stream);
    read_response(&mut reader)
}

/// `application/x-www-form-urlencoded` encoding.
pub fn form_encode(fields: &[(&str, &str)]) -> String {
    fields
        .iter()
        .map(|(k, v)| format!("{}={}", percent_encode(k), percent_encode(v)))
        .collect::<Vec<_>>()
        .join("&")
}

pub fn form_decode(text: &str) -> Vec<(String, String)> {
    text.split('&')
        .filter(|p| !p.is_empty())
        .map(|pair| {
            let (k, v) = pair.split_once('=').unwrap_or((pair, ""));
            (percent_decode(k), percent_decode(v))
        })
        .collect()
}

fn percent_encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => {
                out.push(b as char)
            }
            b' ' => out.push('+'),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

fn percent_decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'+' => out.push(b' '),
            b'%' if i + 2 < bytes.len() => match (hex_val(bytes[i + 1]), hex_val(bytes[i + 2])) {
                (Some(hi), Some(lo)) => {
                    out.push(hi << 4 | lo);
                    i += 2;
                }
                _ => out.push(b'%'),
            },
            b => out.push(b),
        }
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

fn hex_val(b: u8) -> Option<u8> {
    (b as char).to_digit(16).map(|d| d as u8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn request_round_trip() {
        let req = Request::post("/xml/Connect.xml", "text/xml", "<a/>").basic_auth("admin", "pw");
        let bytes = req.to_bytes("10.0.0.1:80");
        let parsed = read_request(&mut &bytes[..]).unwrap().unwrap();
        assert_eq!(parsed.method, "POST");
        assert_eq!(parsed.body, b"<a/>");
        assert_eq!(parsed.header_value("host"), Some("10.0.0.1:80"));
        assert_eq!(
            parsed.basic_credentials(),
            Some(("admin".to_string(), "pw".to_string()))
        );
    }

    #[test]
    fn chunked_response() {
        let raw = b"HTTP/1.1 200 OK\r\nServer: MoxaHttp/2.2\r\nTransfer-Encoding: chunked\r\n\r\n5\r\nhello\r\n6\r\n world\r\n0\r\n\r\n";
        let resp = read_response(&mut &raw[..]).unwrap();
        assert_eq!(resp.header_value("server"), Some("MoxaHttp/2.2"));
        assert_eq!(resp.body, b"hello world");
    }

    #[test]
    fn body_until_eof_without_length() {
        let raw = b"HTTP/1.0 401 Unauthorized\r\nWWW-Authenticate: Basic realm=\"x\"\r\n\r\ndenied";
        let resp = read_response(&mut &raw[..]).unwrap();
        assert_eq!(resp.status, 401);
        assert_eq!(resp.reason, "Unauthorized");
        assert_eq!(resp.text(), "denied");
    }

    #[test]
    fn rejects_non_http() {
        assert!(matches!(
            read_response(&mut &b"SSH-2.0-OpenSSH\r\n"[..]),
            Err(HttpError::Malformed(_))
        ));
    }

    #[test]
    fn query_parsing() {
        let req =
            Request::get("/home.htm?Password=abc&Submit=Submit&token_text=&FakeChallenge=A%2BB");
        assert_eq!(req.path(), "/home.htm");
        assert_eq!(
            req.query(),
            vec![
                ("Password".into(), "abc".into()),
                ("Submit".into(), "Submit".into()),
                ("token_text".into(), String::new()),
                ("FakeChallenge".into(), "A+B".into()),
            ]
        );
    }

    proptest! {
        #[test]
        fn form_round_trip(k in "[ -~]{0,12}", v in "\\PC{0,16}") {
            let encoded = form_encode(&[(&k, &v)]);
            prop_assert_eq!(form_decode(&encoded), vec![(k.clone(), v.clone())]);
        }
    }
}
