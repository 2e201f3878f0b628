use serde::{Deserialize, Serialize};

use super::cert::HarvestedCertificate;

/// Arc prefix under which SROS encodes node permissions.
pub const SROS_POLICY_PREFIX: [u64; 9] = [1, 2, 3, 4, 5, 6, 7, 8, 9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    SubscriptableTopics,
    PublishableTopics,
    ExecutableServices,
    ReadableParameters,
    Unknown,
}

impl PolicyKind {
    /// Kind encoded by the arc just before the permission arc.
    pub fn from_arc(arc: u64) -> Self {
        match arc {
            1 => PolicyKind::SubscriptableTopics,
            2 => PolicyKind::PublishableTopics,
            4 => PolicyKind::ExecutableServices,
            5 => PolicyKind::ReadableParameters,
            _ => PolicyKind::Unknown,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::SubscriptableTopics => "Subscriptable topics",
            PolicyKind::PublishableTopics => "Publishable topics",
            PolicyKind::ExecutableServices => "Executable services",
            PolicyKind::ReadableParameters => "Readable parameters",
            PolicyKind::Unknown => "Unknown",
        }
    }
}

/// Maps the trailing OID arc to an allow/deny flag.
///
/// The encoding is undocumented upstream; by default arc 2 grants and every
/// other arc denies. `permission_arc` is always kept raw alongside.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermissionConvention {
    pub granted_arcs: Vec<u64>,
}

impl Default for PermissionConvention {
    fn default() -> Self {
        Self {
            granted_arcs: vec![2],
        }
    }
}

impl PermissionConvention {
    pub fn permission(&self, arc: u64) -> bool {
        self.granted_arcs.contains(&arc)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrosPolicy {
    pub oid: String,
    pub kind: PolicyKind,
    pub permission_arc: u64,
    pub permission: bool,
    /// Resource names or globs such as `**`, verbatim.
    #[serde(with = "super::bytes::many")]
    pub values: Vec<Vec<u8>>,
}

impl SrosPolicy {
    /// Builds a policy from its kind and permission arcs.
    pub fn new(
        kind_arc: u64,
        permission_arc: u64,
        values: Vec<Vec<u8>>,
        convention: &PermissionConvention,
    ) -> Self {
        let oid = SROS_POLICY_PREFIX
            .iter()
            .chain([kind_arc, permission_arc].iter())
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(".");
        Self {
            oid,
            kind: PolicyKind::from_arc(kind_arc),
            permission_arc,
            permission: convention.permission(permission_arc),
            values,
        }
    }

    /// The full OID as integer arcs.
    pub fn arcs(&self) -> Vec<u64> {
        crate::proto::der::parse_dotted(&self.oid).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PolicyParse {
    pub policies: Vec<SrosPolicy>,
    /// One diagnostic per skipped, non-SROS policy.
    pub skipped: Vec<String>,
}

/// Decodes SROS permission policies with the default permission convention.
pub fn parse_policies(cert: &HarvestedCertificate) -> Vec<SrosPolicy> {
    parse_policies_with(cert, &PermissionConvention::default()).policies
}

pub fn parse_policies_with(
    cert: &HarvestedCertificate,
    convention: &PermissionConvention,
) -> PolicyParse {
    let mut out = PolicyParse::default();
    for raw in &cert.policies_raw {
        let arcs = crate::proto::der::parse_dotted(&raw.oid);
        match arcs.as_deref() {
            Some([prefix @ .., kind, perm]) if prefix == SROS_POLICY_PREFIX => {
                let mut policy = SrosPolicy::new(*kind, *perm, raw.qualifiers.clone(), convention);
                policy.oid = raw.oid.clone();
                out.policies.push(policy);
            }
            _ => out
                .skipped
                .push(format!("policy {} is not under the SROS prefix", raw.oid)),
        }
    }
    out
}
