//! ROS master detection and communication-graph footprinting over the
//! XML-RPC master API.

mod classify;
mod footprint;
mod probe;

use std::net::SocketAddrV4;

use serde::{Deserialize, Serialize};

use crate::engine::{Adapter, AdapterKind, NegativeProbe, Payload, ProbeContext};

pub use classify::{classify_system, DEFAULT_SIMULATION_MARKERS};
pub use footprint::{footprint_ros, FootprintError};
pub use probe::{check_ros_master, RosMasterProbe, RosVerdict, CALLER_ID};

/// Default ROS master port.
pub const MASTER_PORT: u16 = 11311;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RosNode {
    pub name: String,
    /// XML-RPC URI; empty when the master could not resolve the node.
    pub uri: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RosTopic {
    pub name: String,
    pub msg_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosService {
    pub name: String,
    pub providers: Vec<String>,
}

/// Publishers and subscribers of one topic, by node name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Communication {
    pub publishers: Vec<String>,
    pub topic: RosTopic,
    pub subscribers: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosSystemState {
    pub nodes: Vec<RosNode>,
    pub topics: Vec<RosTopic>,
    pub services: Vec<RosService>,
    pub communications: Vec<Communication>,
}

impl RosSystemState {
    pub fn node(&self, name: &str) -> Option<&RosNode> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn published_by<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a RosTopic> {
        self.communications
            .iter()
            .filter(move |c| c.publishers.iter().any(|p| p == node))
            .map(|c| &c.topic)
    }

    pub fn subscribed_by<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a RosTopic> {
        self.communications
            .iter()
            .filter(move |c| c.subscribers.iter().any(|s| s == node))
            .map(|c| &c.topic)
    }

    pub fn services_of<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a str> {
        self.services
            .iter()
            .filter(move |s| s.providers.iter().any(|p| p == node))
            .map(|s| s.name.as_str())
    }

    /// Every communication participant is a known node and every
    /// communication topic is a known topic.
    pub fn is_closed(&self) -> bool {
        self.communications.iter().all(|c| {
            self.topics.contains(&c.topic)
                && c.publishers
                    .iter()
                    .chain(&c.subscribers)
                    .all(|n| self.node(n).is_some())
        }) && self
            .services
            .iter()
            .flat_map(|s| &s.providers)
            .all(|n| self.node(n).is_some())
    }

    /// Multi-line, per-node description of the graph.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        let node_line = |name: &str| {
            let uri = self.node(name).map(|n| n.uri.as_str()).unwrap_or("");
            format!("{name} XMLRPCUri: {uri}")
        };
        for node in &self.nodes {
            out.push_str(&format!("\nNode: {}\n\n", node_line(&node.name)));
            out.push_str("\t Published topics:\n");
            for t in self.published_by(&node.name) {
                out.push_str(&format!("\t\t * {}(Type: {})\n", t.name, t.msg_type));
            }
            out.push_str("\n\t Subscribed topics:\n");
            for t in self.subscribed_by(&node.name) {
                out.push_str(&format!("\t\t * {}(Type: {})\n", t.name, t.msg_type));
            }
            out.push_str("\n\t Services:\n");
            for s in self.services_of(&node.name) {
                out.push_str(&format!("\t\t * {s}\n"));
            }
        }
        for (i, c) in self.communications.iter().enumerate() {
            out.push_str(&format!("\n\t CommunicationROS {i}:\n\t\t - Publishers:\n"));
            for p in &c.publishers {
                out.push_str(&format!("\t\t\t{}\n", node_line(p)));
            }
            out.push_str(&format!(
                "\t\t - Topic: {}(Type: {})\n\t\t - Subscribers:\n",
                c.topic.name, c.topic.msg_type
            ));
            for s in &c.subscribers {
                out.push_str(&format!("\t\t\t{}\n", node_line(s)));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemNature {
    Empty,
    Real,
    Simulation,
}

impl SystemNature {
    pub fn as_str(self) -> &'static str {
        match self {
            SystemNature::Empty => "empty",
            SystemNature::Real => "real",
            SystemNature::Simulation => "simulation",
        }
    }
}

/// Positive ROS finding. `state` is only gathered in extended mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosHost {
    pub state: Option<RosSystemState>,
    pub nature: Option<SystemNature>,
}

/// Engine adapter for `-t ROS`.
#[derive(Debug, Clone)]
pub struct RosAdapter {
    pub simulation_markers: Vec<String>,
}

impl Default for RosAdapter {
    fn default() -> Self {
        Self {
            simulation_markers: DEFAULT_SIMULATION_MARKERS
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

impl Adapter for RosAdapter {
    fn kind(&self) -> AdapterKind {
        AdapterKind::Ros
    }

    fn probe(&self, target: SocketAddrV4, ctx: &ProbeContext) -> Payload {
        let probe = check_ros_master(target, ctx.timeout());
        if probe.verdict != RosVerdict::RosHost {
            return Payload::Negative(NegativeProbe::new(probe.verdict.as_str(), probe.detail));
        }
        if !ctx.extended() {
            return Payload::Ros(RosHost {
                state: None,
                nature: None,
            });
        }
        let state = match footprint_ros(target, ctx.timeout()) {
            Ok(state) => state,
            // Keep whatever was gathered before the master went away.
            Err(FootprintError::Partial { state, .. }) => *state,
            Err(e) => return Payload::Negative(NegativeProbe::new("malformed", e.to_string())),
        };
        let markers: Vec<&str> = self.simulation_markers.iter().map(String::as_str).collect();
        Payload::Ros(RosHost {
            nature: Some(classify_system(&state, &markers)),
            state: Some(state),
        })
    }
}
