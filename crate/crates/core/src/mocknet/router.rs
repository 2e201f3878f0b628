use std::io;
use std::net::SocketAddrV4;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rand::distributions::Alphanumeric;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::server::{serve_http, Conn, MockServer};
use crate::proto::http::{Request, Response};
use crate::routers::{
    md5_hex, MoxaMarkers, Vendor, EWON_PATH, MOXA_V1_LOGIN_PATH, SIERRA_LOGIN_PATH,
};

pub const WESTERMO_REALM: &str = "Basic realm=\"Westermo ADSL-350\"";
pub const SIERRA_SERVER: &str = "Sierra Wireless ACEmanager";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RouterAuth {
    /// Only this login works.
    Credentials { username: String, password: String },
    /// The console needs no login at all.
    Open,
}

impl RouterAuth {
    pub fn credentials(username: &str, password: &str) -> Self {
        RouterAuth::Credentials {
            username: username.into(),
            password: password.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouterConfig {
    pub vendor: Vendor,
    pub auth: RouterAuth,
}

/// Requests a router mock received.
#[derive(Debug, Default)]
pub struct RouterLog {
    login_attempts: AtomicUsize,
    logins: Mutex<Vec<Request>>,
    challenges: Mutex<Vec<String>>,
}

impl RouterLog {
    pub fn login_attempts(&self) -> usize {
        self.login_attempts.load(Ordering::SeqCst)
    }

    /// Every request that carried credentials, in arrival order.
    pub fn logins(&self) -> Vec<Request> {
        self.logins
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }

    /// Every FakeChallenge handed out.
    pub fn challenges(&self) -> Vec<String> {
        self.challenges
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }

    fn login(&self, req: &Request) {
        self.login_attempts.fetch_add(1, Ordering::SeqCst);
        self.logins
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(req.clone());
    }

    fn issue_challenge(&self) -> String {
        let c: String = rand::thread_rng()
            .sample_iter(&Alphanumeric)
            .take(16)
            .map(char::from)
            .collect();
        self.challenges
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(c.clone());
        c
    }

    fn issued(&self, challenge: &str) -> bool {
        self.challenges
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .iter()
            .any(|c| c == challenge)
    }
}

pub struct RouterMock {
    pub server: MockServer,
    pub log: Arc<RouterLog>,
    pub config: RouterConfig,
}

impl RouterMock {
    pub fn spawn(bind: SocketAddrV4, config: RouterConfig) -> io::Result<Self> {
        let log = Arc::new(RouterLog::default());
        let markers = MoxaMarkers::default();
        let handler = {
            let log = log.clone();
            let config = config.clone();
            Arc::new(move |conn: Conn| {
                serve_http(conn, |req| respond(&config, &markers, &log, req))
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

fn signed(vendor: Vendor, resp: Response) -> Response {
    match vendor {
        // The realm is sent on every reply so the console stays identifiable
        // even when no login is required.
        Vendor::Westermo => resp.header("WWW-Authenticate", WESTERMO_REALM),
        Vendor::Ewon => resp.header("Server", "eWON"),
        Vendor::MoxaV1 => resp.header("Server", "MoxaHttp/1.0"),
        Vendor::MoxaV2 => resp.header("Server", "MoxaHttp/2.2"),
        Vendor::SierraWireless => resp.header("Server", SIERRA_SERVER),
    }
}

fn html(status: u16, body: &str) -> Response {
    Response::new(status)
        .header("Content-Type", "text/html")
        .with_body(body.to_string())
}

fn console_page(markers: &MoxaMarkers) -> Response {
    html(
        200,
        &format!(
            "<html><head><title>{0}</title></head><body>{0}</body></html>",
            markers.success
        ),
    )
}

fn respond(
    config: &RouterConfig,
    markers: &MoxaMarkers,
    log: &RouterLog,
    req: &Request,
) -> Response {
    let resp = match config.vendor {
        Vendor::Westermo | Vendor::Ewon => basic(config, markers, log, req),
        Vendor::MoxaV1 | Vendor::MoxaV2 => moxa(config, markers, log, req),
        Vendor::SierraWireless => sierra(config, log, req),
    };
    signed(config.vendor, resp)
}

fn basic(config: &RouterConfig, markers: &MoxaMarkers, log: &RouterLog, req: &Request) -> Response {
    let given = req.basic_credentials();
    if given.is_some() {
        log.login(req);
    }
    let protected =
        config.vendor == Vendor::Westermo || req.path() == EWON_PATH || req.path() == "/";
    let allowed = match &config.auth {
        RouterAuth::Open => true,
        RouterAuth::Credentials { username, password } => given
            .as_ref()
            .is_some_and(|(u, p)| u == username && p == password),
    };
    if !protected || allowed {
        console_page(markers)
    } else {
        html(401, "<html><body>401 Unauthorized</body></html>")
    }
}

fn login_form(challenge: &str) -> String {
    format!(
        "<html><body><form method=\"post\" action=\"/\">\
         <input type=\"text\" name=\"Username\">\
         <input type=\"password\" name=\"Password\">\
         <input type=\"hidden\" name=\"FakeChallenge\" value=\"{challenge}\">\
         <input type=\"submit\" name=\"Submit\"></form></body></html>"
    )
}

fn field<'a>(fields: &'a [(String, String)], name: &str) -> Option<&'a str> {
    fields
        .iter()
        .find(|(k, _)| k == name)
        .map(|(_, v)| v.as_str())
}

fn moxa(config: &RouterConfig, markers: &MoxaMarkers, log: &RouterLog, req: &Request) -> Response {
    let fields = match (config.vendor, req.method.as_str(), req.path()) {
        (Vendor::MoxaV1, "GET", MOXA_V1_LOGIN_PATH) => Some(req.query()),
        (Vendor::MoxaV2, "POST", "/") => Some(crate::proto::http::form_decode(
            &String::from_utf8_lossy(&req.body),
        )),
        _ => None,
    };
    let Some(fields) = fields else {
        return match &config.auth {
            RouterAuth::Open => console_page(markers),
            RouterAuth::Credentials { .. } => html(200, &login_form(&log.issue_challenge())),
        };
    };
    log.login(req);
    let digest_field = if config.vendor == Vendor::MoxaV1 {
        "Password"
    } else {
        "MD5Password"
    };
    let ok = match &config.auth {
        RouterAuth::Open => true,
        RouterAuth::Credentials { username, password } => {
            let user_ok =
                config.vendor == Vendor::MoxaV1 || field(&fields, "Username") == Some(username);
            user_ok
                && field(&fields, digest_field) == Some(md5_hex(password).as_str())
                && field(&fields, "FakeChallenge").is_some_and(|c| log.issued(c))
        }
    };
    if ok {
        console_page(markers)
    } else {
        html(
            200,
            &format!("<html><body>{}</body></html>", markers.failure),
        )
    }
}

fn between<'a>(text: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = text.find(open)? + open.len();
    let end = start + text[start..].find(close)?;
    Some(&text[start..end])
}

fn sierra(config: &RouterConfig, log: &RouterLog, req: &Request) -> Response {
    if !(req.method == "POST" && req.path() == SIERRA_LOGIN_PATH) {
        return html(200, "<html><body>ACEmanager login</body></html>");
    }
    log.login(req);
    let body = String::from_utf8_lossy(&req.body);
    let login = between(&body, "<login>", "</login>");
    let password = between(&body, "<password><![CDATA[", "]]></password>");
    let ok = match &config.auth {
        RouterAuth::Open => true,
        RouterAuth::Credentials {
            username,
            password: p,
        } => login == Some(username.as_str()) && password == Some(p.as_str()),
    };
    let (status, message) = if ok {
        (0, "OK")
    } else {
        (-1, "Invalid user name or password")
    };
    Response::new(200).header("Content-Type", "text/xml").with_body(format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?><response><action name=\"connect\"><status>{status}</status><message>{message}</message></action></response>"
    ))
}
