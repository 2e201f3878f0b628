//! The index client against a local stand-in for the search API, and the
//! CLI's provider mode end to end.

mod common;

use std::net::{Ipv4Addr, SocketAddrV4};
use std::sync::{Arc, Mutex};

use robotrace::enrichment::{
    query_index, IndexProvider, IndexQuery, ProviderError, ShodanProvider, API_KEY_VAR,
};
use robotrace::mocknet::{serve_http, Conn, MockServer, RouterAuth, RouterConfig, RouterMock};
use robotrace::proto::http::Response;
use robotrace::report::parse_json;
use robotrace::routers::Vendor;
use robotrace::Payload;

use common::loopback;

type Reply = Arc<dyn Fn(&[(String, String)]) -> Response + Send + Sync>;
type QueryLog = Arc<Mutex<Vec<Vec<(String, String)>>>>;

/// Serves `/shodan/host/search` with `reply` and records every query.
fn search_api(reply: Reply) -> (MockServer, QueryLog) {
    let log = Arc::new(Mutex::new(Vec::new()));
    let handler = {
        let log = log.clone();
        Arc::new(move |conn: Conn| {
            let reply = reply.clone();
            let log = log.clone();
            serve_http(conn, move |req| {
                if req.path() != "/shodan/host/search" {
                    return Response::new(404);
                }
                let q = req.query();
                log.lock().unwrap().push(q.clone());
                reply(&q)
            })
        })
    };
    (MockServer::spawn(loopback(0), handler).unwrap(), log)
}

fn field<'a>(q: &'a [(String, String)], name: &str) -> &'a str {
    q.iter()
        .find(|(k, _)| k == name)
        .map(|(_, v)| v.as_str())
        .unwrap_or("")
}

fn matches(addrs: impl IntoIterator<Item = SocketAddrV4>) -> Response {
    let items: Vec<_> = addrs
        .into_iter()
        .map(|a| serde_json::json!({"ip_str": a.ip().to_string(), "port": a.port(), "data": "HTTP/1.1 200 OK"}))
        .collect();
    Response::new(200)
        .header("Content-Type", "application/json")
        .with_body(serde_json::json!({"matches": items, "total": items.len()}).to_string())
}

fn url(server: &MockServer) -> String {
    format!("http://{}", server.addr())
}

#[test]
fn pages_until_a_short_page() {
    let (server, log) = search_api(Arc::new(|q| {
        let page: u32 = field(q, "page").parse().unwrap();
        let n = if page == 1 { 100 } else { 30 };
        matches(
            (0..n).map(|i| SocketAddrV4::new(Ipv4Addr::new(192, 0, 2, (page * 100 + i) as u8), 80)),
        )
    }));
    let provider = ShodanProvider::new(Some("k3y".into())).with_base_url(&url(&server));
    let q = IndexQuery::for_vendor(Vendor::Ewon);
    let found = query_index(&provider, &q, 500).unwrap();
    assert_eq!(found.len(), 130);
    let log = log.lock().unwrap();
    assert_eq!(log.len(), 2);
    assert_eq!(field(&log[0], "key"), "k3y");
    assert_eq!(field(&log[0], "query"), q.query_string);
    assert_eq!(field(&log[1], "page"), "2");
}

#[test]
fn limit_truncates_without_extra_pages() {
    let (server, log) = search_api(Arc::new(|_| {
        matches((0..100).map(|i| SocketAddrV4::new(Ipv4Addr::new(198, 51, 100, i), 8080)))
    }));
    let provider = ShodanProvider::new(Some("k".into())).with_base_url(&url(&server));
    assert_eq!(
        provider
            .search(&IndexQuery::for_vendor(Vendor::MoxaV2), 7)
            .unwrap()
            .len(),
        7
    );
    assert_eq!(log.lock().unwrap().len(), 1);
}

#[test]
fn error_statuses_are_classified() {
    for (status, want) in [
        (401, ProviderError::Auth),
        (403, ProviderError::Auth),
        (402, ProviderError::Quota),
        (429, ProviderError::Quota),
    ] {
        let (server, _) = search_api(Arc::new(move |_| Response::new(status).with_body("{}")));
        let provider = ShodanProvider::new(Some("k".into())).with_base_url(&url(&server));
        assert_eq!(
            query_index(&provider, &IndexQuery::for_vendor(Vendor::Ewon), 5),
            Err(want)
        );
    }
}

#[test]
fn provider_mode_scans_indexed_targets() {
    let ewon = RouterMock::spawn(
        loopback(0),
        RouterConfig {
            vendor: Vendor::Ewon,
            auth: RouterAuth::credentials("adm", "adm"),
        },
    )
    .unwrap();
    let target = ewon.addr();
    let ewon_query = IndexQuery::for_vendor(Vendor::Ewon).query_string;
    let (server, log) = search_api(Arc::new(move |q| {
        if field(q, "query") == ewon_query {
            matches([target])
        } else {
            matches([])
        }
    }));
    // No other test here reads the environment.
    std::env::set_var(API_KEY_VAR, "from-env");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("indexed.json");
    let mut stdout = Vec::new();
    let mut stderr = Vec::new();
    let code = robotrace::cli::run(
        [
            "robotrace",
            "-t",
            "IROUTERS",
            "--provider",
            "shodan",
            "--provider-url",
            &url(&server),
            "--attempt-delay",
            "0",
            "--whois",
            "bundled",
            "-o",
            out.to_str().unwrap(),
        ],
        &mut std::io::empty(),
        &mut stdout,
        &mut stderr,
    );
    assert_eq!(code, 0, "{}", String::from_utf8_lossy(&stderr));
    assert_eq!(log.lock().unwrap().len(), Vendor::ALL.len());
    assert!(log
        .lock()
        .unwrap()
        .iter()
        .all(|q| field(q, "key") == "from-env"));
    let report = parse_json(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(report.findings.len(), 1);
    let f = &report.findings[0];
    assert!(f.indexed);
    let Payload::Router(r) = &f.payload else {
        panic!("{f:?}")
    };
    assert_eq!(r.model.vendor, Vendor::Ewon);
    let e = r.enrichment.as_ref().expect("whois enrichment");
    assert_eq!(e.country, "ZZ");
    assert!(String::from_utf8_lossy(&stdout).contains("[+] eWON router in http://"));
}
