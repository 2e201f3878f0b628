use std::net::SocketAddrV4;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::proto::xmlrpc::{self, CallError, MethodResponse, Value};

/// Caller id sent with every master API call.
pub const CALLER_ID: &str = "/robotrace";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RosVerdict {
    RosHost,
    XmlrpcNotRos,
    Unreachable,
    Malformed,
}

impl RosVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            RosVerdict::RosHost => "ros_host",
            RosVerdict::XmlrpcNotRos => "xmlrpc_not_ros",
            RosVerdict::Unreachable => "unreachable",
            RosVerdict::Malformed => "malformed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosMasterProbe {
    pub target: SocketAddrV4,
    pub verdict: RosVerdict,
    /// Fault string, transport error or status message.
    pub detail: String,
}

/// `(topic or service, [node...])` entries from one getSystemState list.
pub(crate) type Registrations = Vec<(String, Vec<String>)>;

pub(crate) struct SystemTriple {
    pub publishers: Registrations,
    pub subscribers: Registrations,
    pub services: Registrations,
}

pub(crate) enum MasterReply<T> {
    Ok(T),
    Refused { code: i32, message: String },
}

fn registrations(v: &Value) -> Option<Registrations> {
    v.as_array()?
        .iter()
        .map(|entry| {
            let pair = entry.as_array()?;
            let [name, nodes] = pair else { return None };
            let nodes = nodes
                .as_array()?
                .iter()
                .map(|n| n.as_str().map(str::to_string))
                .collect::<Option<Vec<_>>>()?;
            Some((name.as_str()?.to_string(), nodes))
        })
        .collect()
}

/// Splits a master API `[code, statusMessage, value]` reply.
pub(crate) fn master_reply(value: &Value) -> Option<MasterReply<&Value>> {
    let items = value.as_array()?;
    let [code, message, payload] = items else {
        return None;
    };
    let code = code.as_i32()?;
    if code != 1 {
        return Some(MasterReply::Refused {
            code,
            message: message.as_str().unwrap_or_default().to_string(),
        });
    }
    Some(MasterReply::Ok(payload))
}

pub(crate) fn parse_system_state(value: &Value) -> Option<MasterReply<SystemTriple>> {
    Some(match master_reply(value)? {
        MasterReply::Refused { code, message } => MasterReply::Refused { code, message },
        MasterReply::Ok(payload) => {
            let lists = payload.as_array()?;
            let [p, s, v] = lists else { return None };
            MasterReply::Ok(SystemTriple {
                publishers: registrations(p)?,
                subscribers: registrations(s)?,
                services: registrations(v)?,
            })
        }
    })
}

pub(crate) fn classify_call_error(err: &CallError) -> RosVerdict {
    match err {
        CallError::Http(e) if e.is_unreachable() => RosVerdict::Unreachable,
        CallError::Http(crate::proto::http::HttpError::Io(_)) => RosVerdict::Unreachable,
        _ => RosVerdict::Malformed,
    }
}

/// Issues one `getSystemState` call and classifies the endpoint.
pub fn check_ros_master(target: SocketAddrV4, timeout: Duration) -> RosMasterProbe {
    let (verdict, detail) =
        match xmlrpc::call(target, "getSystemState", &[CALLER_ID.into()], timeout) {
            Ok(MethodResponse::Fault { message, .. }) => (RosVerdict::XmlrpcNotRos, message),
            Ok(MethodResponse::Success(value)) => match parse_system_state(&value) {
                Some(MasterReply::Ok(_)) => (RosVerdict::RosHost, String::new()),
                Some(MasterReply::Refused { code, message }) => (
                    RosVerdict::XmlrpcNotRos,
                    format!("master API returned code {code}: {message}"),
                ),
                None => (
                    RosVerdict::Malformed,
                    "XML-RPC reply is not a system state triple".to_string(),
                ),
            },
            Err(e) => (classify_call_error(&e), e.to_string()),
        };
    RosMasterProbe {
        target,
        verdict,
        detail,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triple(code: i32) -> Value {
        Value::Array(vec![
            Value::Int(code),
            "current system state".into(),
            Value::Array(vec![
                Value::Array(vec![Value::Array(vec![
                    "/chatter".into(),
                    vec!["/talker"].into(),
                ])]),
                Value::Array(vec![]),
                Value::Array(vec![]),
            ]),
        ])
    }

    #[test]
    fn parses_status_one_triple() {
        match parse_system_state(&triple(1)).unwrap() {
            MasterReply::Ok(t) => {
                assert_eq!(
                    t.publishers,
                    vec![("/chatter".into(), vec!["/talker".into()])]
                );
                assert!(t.subscribers.is_empty() && t.services.is_empty());
            }
            MasterReply::Refused { .. } => panic!("expected ok"),
        }
    }

    #[test]
    fn non_one_code_is_refused() {
        assert!(matches!(
            parse_system_state(&triple(-1)),
            Some(MasterReply::Refused { code: -1, .. })
        ));
    }

    #[test]
    fn wrong_shapes_are_rejected() {
        assert!(parse_system_state(&Value::Str("hi".into())).is_none());
        assert!(parse_system_state(&Value::Array(vec![Value::Int(1), "x".into()])).is_none());
        let bad_lists = Value::Array(vec![Value::Int(1), "x".into(), Value::Array(vec![])]);
        assert!(parse_system_state(&bad_lists).is_none());
    }

    #[test]
    fn closed_port_is_unreachable() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = match listener.local_addr().unwrap() {
            std::net::SocketAddr::V4(a) => a,
            _ => unreachable!(),
        };
        drop(listener);
        let probe = check_ros_master(addr, Duration::from_secs(1));
        assert_eq!(probe.verdict, RosVerdict::Unreachable);
        assert_eq!(probe.detail, "Connection refused");
    }
}
