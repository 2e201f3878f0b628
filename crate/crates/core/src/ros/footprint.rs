use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddrV4;
use std::time::Duration;

use thiserror::Error;

use super::probe::{
    classify_call_error, master_reply, parse_system_state, MasterReply, RosVerdict, CALLER_ID,
};
use super::{Communication, RosNode, RosService, RosSystemState, RosTopic};
use crate::proto::xmlrpc::{self, MethodResponse, Value};

/// Type recorded for topics the master lists without a type.
pub const UNKNOWN_TYPE: &str = "unknown/unknown";

#[derive(Debug, Error)]
pub enum FootprintError {
    #[error("not a ROS master ({verdict:?}): {detail}")]
    NotRos { verdict: RosVerdict, detail: String },
    #[error("master stopped answering mid-footprint: {cause}")]
    Partial {
        state: Box<RosSystemState>,
        cause: String,
    },
}

fn call(
    target: SocketAddrV4,
    method: &str,
    params: &[Value],
    timeout: Duration,
) -> Result<Value, String> {
    match xmlrpc::call(target, method, params, timeout) {
        Ok(MethodResponse::Success(v)) => Ok(v),
        Ok(MethodResponse::Fault { message, .. }) => Err(format!("{method} fault: {message}")),
        Err(e) => Err(format!("{method}: {e}")),
    }
}

/// Reconstructs the node/topic/service graph of a master.
///
/// Only read-only master calls are issued: `getSystemState`,
/// `getTopicTypes` and one `lookupNode` per node.
pub fn footprint_ros(
    target: SocketAddrV4,
    timeout: Duration,
) -> Result<RosSystemState, FootprintError> {
    let triple = match xmlrpc::call(target, "getSystemState", &[CALLER_ID.into()], timeout) {
        Ok(MethodResponse::Success(v)) => match parse_system_state(&v) {
            Some(MasterReply::Ok(t)) => t,
            Some(MasterReply::Refused { code, message }) => {
                return Err(FootprintError::NotRos {
                    verdict: RosVerdict::XmlrpcNotRos,
                    detail: format!("code {code}: {message}"),
                })
            }
            None => {
                return Err(FootprintError::NotRos {
                    verdict: RosVerdict::Malformed,
                    detail: "reply is not a system state triple".into(),
                })
            }
        },
        Ok(MethodResponse::Fault { message, .. }) => {
            return Err(FootprintError::NotRos {
                verdict: RosVerdict::XmlrpcNotRos,
                detail: message,
            })
        }
        Err(e) => {
            return Err(FootprintError::NotRos {
                verdict: classify_call_error(&e),
                detail: e.to_string(),
            })
        }
    };

    let node_names: BTreeSet<&String> = triple
        .publishers
        .iter()
        .chain(&triple.subscribers)
        .chain(&triple.services)
        .flat_map(|(_, nodes)| nodes)
        .collect();

    let mut state = RosSystemState {
        nodes: node_names
            .iter()
            .map(|n| RosNode {
                name: n.to_string(),
                uri: String::new(),
            })
            .collect(),
        ..Default::default()
    };
    state.services = triple
        .services
        .iter()
        .map(|(name, providers)| RosService {
            name: name.clone(),
            providers: providers.clone(),
        })
        .collect();

    let publishers: BTreeMap<&str, &Vec<String>> = triple
        .publishers
        .iter()
        .map(|(t, n)| (t.as_str(), n))
        .collect();
    let subscribers: BTreeMap<&str, &Vec<String>> = triple
        .subscribers
        .iter()
        .map(|(t, n)| (t.as_str(), n))
        .collect();
    let topic_names: BTreeSet<&str> = publishers
        .keys()
        .chain(subscribers.keys())
        .copied()
        .collect();

    let build_graph = |types: &BTreeMap<String, String>, state: &mut RosSystemState| {
        let type_of = |t: &str| {
            types
                .get(t)
                .cloned()
                .unwrap_or_else(|| UNKNOWN_TYPE.to_string())
        };
        let mut all: BTreeSet<&str> = topic_names.clone();
        all.extend(types.keys().map(String::as_str));
        state.topics = all
            .iter()
            .map(|t| RosTopic {
                name: t.to_string(),
                msg_type: type_of(t),
            })
            .collect();
        state.communications = topic_names
            .iter()
            .map(|t| Communication {
                publishers: publishers.get(t).map(|v| v.to_vec()).unwrap_or_default(),
                topic: RosTopic {
                    name: t.to_string(),
                    msg_type: type_of(t),
                },
                subscribers: subscribers.get(t).map(|v| v.to_vec()).unwrap_or_default(),
            })
            .collect();
    };
    build_graph(&BTreeMap::new(), &mut state);

    let partial = |state: &RosSystemState, cause: String| FootprintError::Partial {
        state: Box::new(state.clone()),
        cause,
    };

    for i in 0..state.nodes.len() {
        let name = state.nodes[i].name.clone();
        let reply = call(
            target,
            "lookupNode",
            &[CALLER_ID.into(), name.into()],
            timeout,
        )
        .map_err(|cause| partial(&state, cause))?;
        if let Some(MasterReply::Ok(uri)) = master_reply(&reply) {
            state.nodes[i].uri = uri.as_str().unwrap_or_default().to_string();
        }
    }

    let reply = call(target, "getTopicTypes", &[CALLER_ID.into()], timeout)
        .map_err(|cause| partial(&state, cause))?;
    let mut types = BTreeMap::new();
    if let Some(MasterReply::Ok(list)) = master_reply(&reply) {
        for entry in list.as_array().unwrap_or_default() {
            if let Some([name, ty]) = entry.as_array() {
                if let (Some(name), Some(ty)) = (name.as_str(), ty.as_str()) {
                    types.insert(name.to_string(), ty.to_string());
                }
            }
        }
    }
    build_graph(&types, &mut state);
    Ok(state)
}
