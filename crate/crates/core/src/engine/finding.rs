use std::net::SocketAddrV4;

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ros::RosHost;
use crate::routers::RouterFinding;
use crate::sros::SrosHost;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AdapterKind {
    #[serde(rename = "ROS")]
    Ros,
    #[serde(rename = "SROS")]
    Sros,
    #[serde(rename = "IROUTERS")]
    IRouters,
}

impl AdapterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AdapterKind::Ros => "ROS",
            AdapterKind::Sros => "SROS",
            AdapterKind::IRouters => "IROUTERS",
        }
    }
}

impl std::fmt::Display for AdapterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AdapterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "ROS" => Ok(AdapterKind::Ros),
            "SROS" => Ok(AdapterKind::Sros),
            "IROUTERS" => Ok(AdapterKind::IRouters),
            _ => Err(format!(
                "unknown adapter {s:?} (expected ROS, SROS or IROUTERS)"
            )),
        }
    }
}

/// A probe that did not find what the adapter looks for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegativeProbe {
    /// Adapter-specific outcome class, e.g. `unreachable` or `xmlrpc_not_ros`.
    pub verdict: String,
    pub detail: String,
}

impl NegativeProbe {
    pub fn new(verdict: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            verdict: verdict.into(),
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Payload {
    Ros(RosHost),
    Sros(SrosHost),
    Router(RouterFinding),
    Negative(NegativeProbe),
}

impl Payload {
    pub fn is_positive(&self) -> bool {
        !matches!(self, Payload::Negative(_))
    }

    fn fits(&self, adapter: AdapterKind) -> bool {
        matches!(
            (self, adapter),
            (Payload::Negative(_), _)
                | (Payload::Ros(_), AdapterKind::Ros)
                | (Payload::Sros(_), AdapterKind::Sros)
                | (Payload::Router(_), AdapterKind::IRouters)
        )
    }
}

#[derive(Debug, Error)]
#[error("{payload} payload cannot be tagged {adapter}")]
pub struct PayloadMismatch {
    pub adapter: AdapterKind,
    pub payload: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub target: SocketAddrV4,
    pub adapter: AdapterKind,
    pub payload: Payload,
    pub timestamp: DateTime<Utc>,
    /// The target came from an internet-index query rather than a sweep.
    #[serde(default)]
    pub indexed: bool,
}

impl Finding {
    pub fn new(
        target: SocketAddrV4,
        adapter: AdapterKind,
        payload: Payload,
    ) -> Result<Self, PayloadMismatch> {
        Self::at(target, adapter, payload, now())
    }

    pub fn at(
        target: SocketAddrV4,
        adapter: AdapterKind,
        payload: Payload,
        timestamp: DateTime<Utc>,
    ) -> Result<Self, PayloadMismatch> {
        if !payload.fits(adapter) {
            let payload = match payload {
                Payload::Ros(_) => "ROS",
                Payload::Sros(_) => "SROS",
                Payload::Router(_) => "router",
                Payload::Negative(_) => "negative",
            };
            return Err(PayloadMismatch { adapter, payload });
        }
        Ok(Self {
            target,
            adapter,
            payload,
            timestamp,
            indexed: false,
        })
    }

    pub fn is_positive(&self) -> bool {
        self.payload.is_positive()
    }
}

/// Current UTC time truncated to microseconds, the precision reports keep.
pub fn now() -> DateTime<Utc> {
    Utc::now().trunc_subsecs(6)
}
