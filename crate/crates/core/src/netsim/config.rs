use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::NetsimError;
use crate::vault::{MessageKind, NodeId, ProtocolMessage, Role, Topology};

fn default_qubits() -> usize {
    8
}

fn default_latency() -> u64 {
    1
}

fn default_deadline() -> u64 {
    64
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: NodeId,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home_msb: Option<NodeId>,
}

impl NodeSpec {
    pub fn new(id: &str, role: Role) -> Self {
        Self {
            id: id.to_owned(),
            role,
            home_msb: None,
        }
    }

    pub fn wallet(id: &str, home: &str) -> Self {
        Self {
            id: id.to_owned(),
            role: Role::Wallet,
            home_msb: Some(home.to_owned()),
        }
    }
}

/// Undirected link. `latency` overrides the network default.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: NodeId,
    pub b: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<u64>,
}

impl LinkSpec {
    pub fn new(a: &str, b: &str) -> Self {
        Self {
            a: a.to_owned(),
            b: b.to_owned(),
            latency: None,
        }
    }
}

/// Predicate over message headers. Absent fields match anything.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageMatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<MessageKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation_id: Option<String>,
}

impl MessageMatch {
    pub fn matches(&self, msg: &ProtocolMessage) -> bool {
        self.kind.is_none_or(|k| k == msg.kind)
            && self.from.as_ref().is_none_or(|f| *f == msg.from)
            && self.to.as_ref().is_none_or(|t| *t == msg.to)
            && self.correlation_id.as_ref().is_none_or(|c| *c == msg.correlation_id)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassicalAction {
    Drop,
    Delay(u64),
    Duplicate,
}

/// Quantum links admit only loss; a handle moves once and cannot be copied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantumAction {
    Drop,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalRule {
    #[serde(rename = "match", default)]
    pub matches: MessageMatch,
    pub action: ClassicalAction,
    /// Apply to at most this many matching messages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumRule {
    #[serde(rename = "match", default)]
    pub matches: MessageMatch,
    pub action: QuantumAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
}

/// Availability attacks on links. The first rule whose predicate matches
/// and whose limit is not spent applies.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryPolicy {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classical: Vec<ClassicalRule>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quantum: Vec<QuantumRule>,
}

impl AdversaryPolicy {
    pub fn is_empty(&self) -> bool {
        self.classical.is_empty() && self.quantum.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub seed: u64,
    #[serde(default = "default_qubits")]
    pub qubits: usize,
    pub nodes: Vec<NodeSpec>,
    /// Absent means a full mesh.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical_links: Option<Vec<LinkSpec>>,
    /// Absent means a full mesh between vault nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantum_links: Option<Vec<LinkSpec>>,
    #[serde(default = "default_latency")]
    pub latency: u64,
    /// Ticks a process may run before it is reported as timed out.
    #[serde(default = "default_deadline")]
    pub deadline: u64,
    #[serde(default, skip_serializing_if = "AdversaryPolicy::is_empty")]
    pub adversary: AdversaryPolicy,
    #[serde(default)]
    pub test_quantum_wallets: bool,
}

/// Resolved link latencies keyed by the sorted endpoint pair.
#[derive(Clone, Debug, Default)]
pub(crate) struct LinkTable(BTreeMap<(NodeId, NodeId), u64>);

impl LinkTable {
    fn key(a: &str, b: &str) -> (NodeId, NodeId) {
        if a <= b {
            (a.to_owned(), b.to_owned())
        } else {
            (b.to_owned(), a.to_owned())
        }
    }

    fn mesh(ids: &[&NodeId], latency: u64) -> Self {
        let mut t = BTreeMap::new();
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                t.insert(Self::key(a, b), latency);
            }
        }
        Self(t)
    }

    fn explicit(links: &[LinkSpec], latency: u64) -> Self {
        Self(
            links
                .iter()
                .map(|l| (Self::key(&l.a, &l.b), l.latency.unwrap_or(latency)))
                .collect(),
        )
    }

    pub(crate) fn latency(&self, a: &str, b: &str) -> Option<u64> {
        self.0.get(&Self::key(a, b)).copied()
    }
}

impl NetworkConfig {
    /// One issuer, vaults `msbs`, wallets as `(id, home)` pairs, full meshes.
    pub fn new(seed: u64, qubits: usize, ia: &str, msbs: &[&str], wallets: &[(&str, &str)]) -> Self {
        let mut nodes = vec![NodeSpec::new(ia, Role::Ia)];
        nodes.extend(msbs.iter().map(|m| NodeSpec::new(m, Role::Msb)));
        nodes.extend(wallets.iter().map(|(w, h)| NodeSpec::wallet(w, h)));
        Self {
            seed,
            qubits,
            nodes,
            classical_links: None,
            quantum_links: None,
            latency: default_latency(),
            deadline: default_deadline(),
            adversary: AdversaryPolicy::default(),
            test_quantum_wallets: false,
        }
    }

    pub fn from_json(s: &str) -> Result<Self, NetsimError> {
        let config: Self = serde_json::from_str(s)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn role_of(&self, id: &str) -> Option<Role> {
        self.nodes.iter().find(|n| n.id == id).map(|n| n.role)
    }

    pub fn ia(&self) -> Option<&str> {
        self.nodes.iter().find(|n| n.role == Role::Ia).map(|n| n.id.as_str())
    }

    pub fn validate(&self) -> Result<(), NetsimError> {
        let err = |m: String| Err(NetsimError::Config(m));
        if let Err(e) = crate::money::SchemeParams::new(self.qubits) {
            return err(e.to_string());
        }
        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            if n.id.is_empty() {
                return err("empty node id".into());
            }
            if !ids.insert(n.id.as_str()) {
                return err(format!("duplicate node id {}", n.id));
            }
        }
        let ias = self.nodes.iter().filter(|n| n.role == Role::Ia).count();
        if ias != 1 {
            return err(format!("expected exactly one issuing authority, found {ias}"));
        }
        for n in &self.nodes {
            match (n.role, &n.home_msb) {
                (Role::Wallet, None) => return err(format!("wallet {} has no home_msb", n.id)),
                (Role::Wallet, Some(h)) if self.role_of(h) != Some(Role::Msb) => {
                    return err(format!("wallet {} has unknown home vault {h}", n.id))
                }
                (Role::Wallet, Some(_)) => {}
                (_, Some(_)) => return err(format!("only wallets have a home_msb ({})", n.id)),
                (Role::QuantumWallet, None) if !self.test_quantum_wallets => {
                    return err(format!("quantum wallet {} requires test_quantum_wallets", n.id))
                }
                _ => {}
            }
        }
        if self.latency == 0 {
            return err("latency must be at least 1".into());
        }
        if self.deadline == 0 {
            return err("deadline must be at least 1".into());
        }
        let check_link = |l: &LinkSpec, quantum: bool| -> Result<(), NetsimError> {
            if l.a == l.b {
                return err(format!("self link on {}", l.a));
            }
            if l.latency == Some(0) {
                return err(format!("zero latency on {}-{}", l.a, l.b));
            }
            for end in [&l.a, &l.b] {
                let Some(role) = self.role_of(end) else {
                    return err(format!("link endpoint {end} is not a node"));
                };
                let vault_like = role == Role::Msb || (role == Role::QuantumWallet && self.test_quantum_wallets);
                if quantum && !vault_like {
                    return err(format!("quantum link endpoint {end} is a {role:?}, not a vault"));
                }
            }
            Ok(())
        };
        for l in self.classical_links.iter().flatten() {
            check_link(l, false)?;
        }
        for l in self.quantum_links.iter().flatten() {
            check_link(l, true)?;
        }
        Ok(())
    }

    pub fn topology(&self) -> Topology {
        let by_role = |r: Role| -> Vec<NodeId> {
            self.nodes
                .iter()
                .filter(|n| n.role == r)
                .map(|n| n.id.clone())
                .collect()
        };
        Topology {
            ia: self.ia().unwrap_or_default().to_owned(),
            msbs: by_role(Role::Msb),
            wallets: self
                .nodes
                .iter()
                .filter(|n| n.role == Role::Wallet)
                .map(|n| (n.id.clone(), n.home_msb.clone().unwrap_or_default()))
                .collect(),
            quantum_wallets: by_role(Role::QuantumWallet),
            qubits: self.qubits,
        }
    }

    pub(crate) fn classical_table(&self) -> LinkTable {
        match &self.classical_links {
            Some(links) => LinkTable::explicit(links, self.latency),
            None => LinkTable::mesh(&self.nodes.iter().map(|n| &n.id).collect::<Vec<_>>(), self.latency),
        }
    }

    pub(crate) fn quantum_table(&self) -> LinkTable {
        match &self.quantum_links {
            Some(links) => LinkTable::explicit(links, self.latency),
            None => {
                let vaults: Vec<&NodeId> = self
                    .nodes
                    .iter()
                    .filter(|n| matches!(n.role, Role::Msb | Role::QuantumWallet))
                    .map(|n| &n.id)
                    .collect();
                LinkTable::mesh(&vaults, self.latency)
            }
        }
    }
}
