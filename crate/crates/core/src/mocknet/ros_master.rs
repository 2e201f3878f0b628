use std::collections::BTreeSet;
use std::io::{self, Read, Write};
use std::net::SocketAddrV4;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::server::{serve_http, Conn, MockServer};
use crate::proto::http::Response;
use crate::proto::xmlrpc::{self, Value};
use crate::ros::{Communication, RosNode, RosService, RosSystemState, RosTopic};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockNode {
    pub name: String,
    /// `None` makes `lookupNode` fail for this node.
    pub uri: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockTopic {
    pub name: String,
    pub msg_type: String,
    #[serde(default)]
    pub publishers: Vec<String>,
    #[serde(default)]
    pub subscribers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockService {
    pub name: String,
    pub providers: Vec<String>,
}

/// The graph a mock master reports.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosGraph {
    #[serde(default)]
    pub nodes: Vec<MockNode>,
    #[serde(default)]
    pub topics: Vec<MockTopic>,
    #[serde(default)]
    pub services: Vec<MockService>,
}

fn node(name: &str, uri: &str) -> MockNode {
    MockNode {
        name: name.into(),
        uri: Some(uri.into()),
    }
}

fn topic(name: &str, msg_type: &str, publishers: &[&str], subscribers: &[&str]) -> MockTopic {
    MockTopic {
        name: name.into(),
        msg_type: msg_type.into(),
        publishers: publishers.iter().map(|s| s.to_string()).collect(),
        subscribers: subscribers.iter().map(|s| s.to_string()).collect(),
    }
}

fn service(name: &str, provider: &str) -> MockService {
    MockService {
        name: name.into(),
        providers: vec![provider.into()],
    }
}

impl RosGraph {
    /// A freshly started master: only the logging node.
    pub fn rosout_only() -> Self {
        Self {
            nodes: vec![node("/rosout", "http://robot:39719/")],
            topics: vec![
                topic("/rosout_agg", "rosgraph_msgs/Log", &["/rosout"], &[]),
                topic("/rosout", "rosgraph_msgs/Log", &[], &["/rosout"]),
            ],
            services: vec![
                service("/rosout/set_logger_level", "/rosout"),
                service("/rosout/get_loggers", "/rosout"),
            ],
        }
    }

    /// rosout plus a talker publishing `/chatter` to a listener.
    pub fn talker_listener() -> Self {
        let mut g = Self::rosout_only();
        g.nodes.push(node("/talker", "http://robot:41001/"));
        g.nodes.push(node("/listener", "http://robot:41002/"));
        g.topics.push(topic(
            "/chatter",
            "std_msgs/String",
            &["/talker"],
            &["/listener"],
        ));
        for t in &mut g.topics {
            if t.name == "/rosout" {
                t.publishers = vec!["/talker".into(), "/listener".into()];
            }
        }
        for n in ["/talker", "/listener"] {
            g.services.push(service(&format!("{n}/get_loggers"), n));
            g.services
                .push(service(&format!("{n}/set_logger_level"), n));
        }
        g
    }

    /// `n` nodes wired by random publications, subscriptions and services.
    pub fn random<R: Rng>(rng: &mut R, n: usize) -> Self {
        let names: Vec<String> = (0..n).map(|i| format!("/node_{i}")).collect();
        let mut g = Self {
            nodes: names
                .iter()
                .enumerate()
                .map(|(i, name)| node(name, &format!("http://robot:{}/", 40000 + i)))
                .collect(),
            ..Default::default()
        };
        if n == 0 {
            return g;
        }
        for t in 0..rng.gen_range(1..=n) {
            let pick = |rng: &mut R| -> Vec<String> {
                let k = rng.gen_range(0..=n.min(3));
                let mut chosen: Vec<String> = names.choose_multiple(rng, k).cloned().collect();
                chosen.sort();
                chosen
            };
            let publishers = pick(rng);
            let subscribers = pick(rng);
            g.topics.push(MockTopic {
                name: format!("/topic_{t}"),
                msg_type: "std_msgs/String".into(),
                publishers,
                subscribers,
            });
        }
        for (i, name) in names.iter().enumerate() {
            if rng.gen_bool(0.5) {
                g.services.push(service(&format!("/srv_{i}"), name));
            }
        }
        g
    }

    fn registrations(&self, pick: impl Fn(&MockTopic) -> &Vec<String>) -> Value {
        Value::Array(
            self.topics
                .iter()
                .filter(|t| !pick(t).is_empty())
                .map(|t| Value::Array(vec![t.name.as_str().into(), pick(t).clone().into()]))
                .collect(),
        )
    }

    fn system_state(&self) -> Value {
        let services = Value::Array(
            self.services
                .iter()
                .map(|s| Value::Array(vec![s.name.as_str().into(), s.providers.clone().into()]))
                .collect(),
        );
        Value::Array(vec![
            self.registrations(|t| &t.publishers),
            self.registrations(|t| &t.subscribers),
            services,
        ])
    }

    /// The state a footprint of this graph must reconstruct.
    pub fn expected_state(&self) -> RosSystemState {
        let mentioned: BTreeSet<&String> = self
            .topics
            .iter()
            .flat_map(|t| t.publishers.iter().chain(&t.subscribers))
            .chain(self.services.iter().flat_map(|s| &s.providers))
            .collect();
        let nodes = mentioned
            .into_iter()
            .map(|name| RosNode {
                name: name.clone(),
                uri: self
                    .nodes
                    .iter()
                    .find(|n| &n.name == name)
                    .and_then(|n| n.uri.clone())
                    .unwrap_or_default(),
            })
            .collect();
        let mut topics: Vec<RosTopic> = self
            .topics
            .iter()
            .map(|t| RosTopic {
                name: t.name.clone(),
                msg_type: t.msg_type.clone(),
            })
            .collect();
        topics.sort();
        let mut communications: Vec<Communication> = self
            .topics
            .iter()
            .filter(|t| !t.publishers.is_empty() || !t.subscribers.is_empty())
            .map(|t| Communication {
                publishers: t.publishers.clone(),
                topic: RosTopic {
                    name: t.name.clone(),
                    msg_type: t.msg_type.clone(),
                },
                subscribers: t.subscribers.clone(),
            })
            .collect();
        communications.sort_by(|a, b| a.topic.name.cmp(&b.topic.name));
        RosSystemState {
            nodes,
            topics,
            services: self
                .services
                .iter()
                .map(|s| RosService {
                    name: s.name.clone(),
                    providers: s.providers.clone(),
                })
                .collect(),
            communications,
        }
    }
}

/// Master API calls that change master state. A scanner must never send one.
pub const MUTATING_METHODS: &[&str] = &[
    "registerService",
    "unregisterService",
    "registerSubscriber",
    "unregisterSubscriber",
    "registerPublisher",
    "unregisterPublisher",
    "setParam",
    "deleteParam",
    "subscribeParam",
    "unsubscribeParam",
];

#[derive(Debug, Default)]
pub struct MasterLog {
    calls: Mutex<Vec<String>>,
    served: AtomicUsize,
}

impl MasterLog {
    pub fn calls(&self) -> Vec<String> {
        self.calls.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn mutating_calls(&self) -> Vec<String> {
        self.calls()
            .into_iter()
            .filter(|m| MUTATING_METHODS.contains(&m.as_str()))
            .collect()
    }
}

fn ok(value: Value) -> Value {
    Value::Array(vec![1.into(), "".into(), value])
}

fn err(message: &str) -> Value {
    Value::Array(vec![(-1).into(), message.into(), 0.into()])
}

fn answer(graph: &RosGraph, method: &str, params: &[Value]) -> String {
    let reply = match method {
        "getSystemState" => ok(graph.system_state()),
        "getTopicTypes" => ok(Value::Array(
            graph
                .topics
                .iter()
                .map(|t| Value::Array(vec![t.name.as_str().into(), t.msg_type.as_str().into()]))
                .collect(),
        )),
        "getPublishedTopics" => ok(Value::Array(
            graph
                .topics
                .iter()
                .filter(|t| !t.publishers.is_empty())
                .map(|t| Value::Array(vec![t.name.as_str().into(), t.msg_type.as_str().into()]))
                .collect(),
        )),
        "lookupNode" => {
            let wanted = params.get(1).and_then(Value::as_str).unwrap_or("");
            match graph
                .nodes
                .iter()
                .find(|n| n.name == wanted)
                .and_then(|n| n.uri.clone())
            {
                Some(uri) => ok(uri.into()),
                None => err(&format!("unknown node [{wanted}]")),
            }
        }
        "getUri" => ok("http://robot:11311/".into()),
        m if MUTATING_METHODS.contains(&m) => ok(1.into()),
        other => return xmlrpc::encode_fault(-1, &format!("method \"{other}\" is not supported")),
    };
    xmlrpc::encode_response(&reply)
}

/// An XML-RPC ROS master serving `graph`.
pub struct RosMasterMock {
    pub server: MockServer,
    pub log: Arc<MasterLog>,
    pub graph: RosGraph,
}

impl RosMasterMock {
    pub fn spawn(bind: SocketAddrV4, graph: RosGraph) -> io::Result<Self> {
        Self::spawn_inner(bind, graph, None)
    }

    /// A master that hangs up on every call after the first `calls`.
    pub fn spawn_dropping_after(
        bind: SocketAddrV4,
        graph: RosGraph,
        calls: usize,
    ) -> io::Result<Self> {
        Self::spawn_inner(bind, graph, Some(calls))
    }

    fn spawn_inner(bind: SocketAddrV4, graph: RosGraph, limit: Option<usize>) -> io::Result<Self> {
        let log = Arc::new(MasterLog::default());
        let handler = {
            let log = log.clone();
            let graph = graph.clone();
            Arc::new(move |conn: Conn| {
                if limit.is_some_and(|l| log.served.fetch_add(1, Ordering::SeqCst) >= l) {
                    return;
                }
                serve_http(conn, |req| {
                    let body = String::from_utf8_lossy(&req.body);
                    let xml = match xmlrpc::parse_call(&body) {
                        Ok((method, params)) => {
                            log.calls
                                .lock()
                                .unwrap_or_else(|e| e.into_inner())
                                .push(method.clone());
                            answer(&graph, &method, &params)
                        }
                        Err(e) => xmlrpc::encode_fault(-1, &e.to_string()),
                    };
                    xml_response(xml)
                })
            })
        };
        Ok(Self {
            server: MockServer::spawn(bind, handler)?,
            log,
            graph,
        })
    }

    pub fn addr(&self) -> SocketAddrV4 {
        self.server.addr()
    }
}

fn xml_response(xml: String) -> Response {
    Response::new(200)
        .header("Server", "BaseHTTP/0.3 Python/2.7.17")
        .header("Content-Type", "text/xml")
        .with_body(xml)
}

/// XML-RPC server that knows no ROS methods.
pub fn spawn_faulting_xmlrpc(bind: SocketAddrV4) -> io::Result<MockServer> {
    MockServer::spawn(
        bind,
        Arc::new(|conn: Conn| {
            serve_http(conn, |req| {
                let body = String::from_utf8_lossy(&req.body);
                let method = xmlrpc::parse_call(&body)
                    .map(|(m, _)| m)
                    .unwrap_or_default();
                xml_response(xmlrpc::encode_fault(
                    1,
                    &format!("method \"{method}\" is not supported"),
                ))
            })
        }),
    )
}

/// Ordinary web server.
pub fn spawn_plain_http(bind: SocketAddrV4) -> io::Result<MockServer> {
    MockServer::spawn(
        bind,
        Arc::new(|conn: Conn| {
            serve_http(conn, |_| {
                Response::new(200)
                    .header("Server", "nginx/1.18.0")
                    .header("Content-Type", "text/html")
                    .with_body("<html><body>It works</body></html>")
            })
        }),
    )
}

/// Echoes whatever arrives until the peer hangs up.
pub fn spawn_echo(bind: SocketAddrV4) -> io::Result<MockServer> {
    MockServer::spawn(
        bind,
        Arc::new(|mut conn: Conn| {
            let mut buf = [0u8; 4096];
            loop {
                match conn.stream.read(&mut buf) {
                    Ok(0) | Err(_) => break,
                    Ok(n) => {
                        if conn.stream.write_all(&buf[..n]).is_err() {
                            break;
                        }
                    }
                }
            }
        }),
    )
}
