use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{NetsimError, NodeSpec, ScriptOp};
use crate::money::{NoteStatus, Serial};
use crate::qsim::HandleId;
use crate::vault::{LedgerEvent, MessageKind, NodeId, Outcome, ProcessKind, QuantumMarker, Receipt, Role};

/// One line of a transcript.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "kebab-case")]
pub enum Record {
    Header {
        config_digest: String,
        seed: u64,
        qubits: usize,
        nodes: Vec<NodeSpec>,
    },
    Action {
        t: u64,
        seq: u64,
        index: usize,
        correlation_id: String,
        process: ProcessKind,
        op: ScriptOp,
    },
    Send {
        t: u64,
        id: String,
        from: NodeId,
        to: NodeId,
        kind: MessageKind,
        correlation_id: String,
        payload: Value,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        quantum: Option<QuantumMarker>,
    },
    Adversary {
        t: u64,
        id: String,
        action: String,
    },
    Undeliverable {
        t: u64,
        id: String,
        reason: String,
    },
    Deliver {
        t: u64,
        seq: u64,
        id: String,
        from: NodeId,
        to: NodeId,
        kind: MessageKind,
        correlation_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        quantum: Option<QuantumMarker>,
    },
    Ledger {
        t: u64,
        entry: LedgerEvent,
    },
    Receipt {
        t: u64,
        terminal: bool,
        receipt: Receipt,
    },
    Timeout {
        t: u64,
        seq: u64,
        correlation_id: String,
    },
    Summary(Summary),
}

/// Ledger totals read from entity state at the end of a run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub ia_active_value: u64,
    pub custody: BTreeMap<NodeId, u64>,
    pub custody_total: u64,
    pub wallets: BTreeMap<NodeId, u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub quiescent: bool,
    pub final_time: u64,
    pub events_processed: u64,
    pub receipts: Vec<Receipt>,
    pub ledger: LedgerSnapshot,
    pub audit: AuditReport,
}

/// Invariants recomputed from the event log alone.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub active_value: u64,
    pub custody_value: u64,
    pub lost_value: u64,
    pub discarded_value: u64,
    pub consumed_unsettled_value: u64,
    pub stranded_value: u64,
    pub in_flight_value: u64,
    pub unaccounted_value: u64,
    pub rejections: usize,
    pub double_custody: usize,
    pub custody_mismatches: usize,
    pub status_violations: usize,
    pub authenticity_violations: usize,
    pub ia_contact_in_transfers: usize,
    pub confidentiality_violations: usize,
    pub causality_violations: usize,
    pub quantum_redeliveries: usize,
}

impl AuditReport {
    /// Active value not held in custody, broken down by cause.
    pub fn losses(&self) -> u64 {
        self.lost_value + self.discarded_value + self.consumed_unsettled_value + self.stranded_value + self.in_flight_value
    }

    /// `active - custody == losses` with every loss traced to an event.
    pub fn loss_accounting_holds(&self) -> bool {
        self.unaccounted_value == 0 && self.active_value == self.custody_value + self.losses()
    }

    pub fn strict_conservation(&self) -> bool {
        self.active_value == self.custody_value
    }

    /// Names of violated invariants; empty when all hold.
    pub fn violations(&self, quiescent: bool) -> Vec<String> {
        let mut v = Vec::new();
        let mut flag = |bad: bool, name: &str| {
            if bad {
                v.push(name.to_owned());
            }
        };
        flag(!quiescent, "non-quiescent");
        flag(!self.loss_accounting_holds(), "loss-accounting");
        flag(quiescent && self.in_flight_value > 0, "in-flight-at-quiescence");
        flag(
            self.rejections == 0 && self.losses() == 0 && !self.strict_conservation(),
            "conservation",
        );
        flag(self.double_custody > 0, "single-custody");
        flag(self.custody_mismatches > 0, "custody-chain");
        flag(self.status_violations > 0, "status-monotonicity");
        flag(self.authenticity_violations > 0, "authenticity-chain");
        flag(self.ia_contact_in_transfers > 0, "no-issuer-in-transfers");
        flag(self.confidentiality_violations > 0, "confidentiality");
        flag(self.causality_violations > 0, "causality");
        flag(self.quantum_redeliveries > 0, "quantum-non-duplication");
        v
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Location {
    Prepared,
    Custody { msb: NodeId, account: NodeId },
    InFlight,
    Lost,
    Discarded,
    Consumed,
}

fn mentions(value: &Value, ids: &BTreeSet<&str>) -> bool {
    match value {
        Value::String(s) => ids.contains(s.as_str()),
        Value::Array(a) => a.iter().any(|v| mentions(v, ids)),
        Value::Object(o) => o.iter().any(|(k, v)| ids.contains(k.as_str()) || mentions(v, ids)),
        _ => false,
    }
}

/// Folds the records into an [`AuditReport`] without consulting any
/// entity state.
pub fn audit(records: &[Record]) -> AuditReport {
    let mut r = AuditReport::default();
    let mut ia: Option<&str> = None;
    let mut wallet_ids: BTreeSet<&str> = BTreeSet::new();
    let mut transfer_corrs: BTreeSet<&str> = BTreeSet::new();
    let mut sent: BTreeMap<&str, u64> = BTreeMap::new();
    let mut delivered_handles: BTreeSet<HandleId> = BTreeSet::new();
    let mut status: BTreeMap<Serial, (NoteStatus, u64)> = BTreeMap::new();
    let mut location: BTreeMap<Serial, Location> = BTreeMap::new();

    for rec in records {
        match rec {
            Record::Header { nodes, .. } => {
                for n in nodes {
                    match n.role {
                        Role::Ia => ia = Some(&n.id),
                        Role::Wallet => {
                            wallet_ids.insert(&n.id);
                        }
                        Role::Msb | Role::QuantumWallet => {}
                    }
                }
            }
            Record::Action { correlation_id, op, .. } => {
                if op.is_transfer() {
                    transfer_corrs.insert(correlation_id);
                }
            }
            Record::Send {
                t,
                id,
                to,
                correlation_id,
                payload,
                ..
            } => {
                sent.entry(id).or_insert(*t);
                if Some(to.as_str()) == ia {
                    if transfer_corrs.contains(correlation_id.as_str()) {
                        r.ia_contact_in_transfers += 1;
                    }
                    if mentions(payload, &wallet_ids) {
                        r.confidentiality_violations += 1;
                    }
                }
            }
            Record::Deliver {
                t, id, quantum, to, correlation_id, ..
            } => {
                match sent.get(id.as_str()) {
                    Some(sent_at) if sent_at <= t => {}
                    _ => r.causality_violations += 1,
                }
                if let Some(m) = quantum {
                    if !delivered_handles.insert(m.handle) {
                        r.quantum_redeliveries += 1;
                    }
                }
                if Some(to.as_str()) == ia && transfer_corrs.contains(correlation_id.as_str()) {
                    r.ia_contact_in_transfers += 1;
                }
            }
            Record::Ledger { entry, .. } => match entry {
                LedgerEvent::Status { serial, value, from, to } => {
                    let current = status.get(serial).map(|(s, _)| *s);
                    let legal = matches!(
                        (from, to),
                        (None, NoteStatus::Pending)
                            | (Some(NoteStatus::Pending), NoteStatus::Active)
                            | (Some(NoteStatus::Active), NoteStatus::Destroyed)
                    );
                    if !legal || current != *from {
                        r.status_violations += 1;
                    }
                    status.insert(*serial, (*to, *value));
                }
                LedgerEvent::Prepared { serial, .. } => {
                    location.entry(*serial).or_insert(Location::Prepared);
                }
                LedgerEvent::Credited { msb, account, serial, .. } => {
                    if !matches!(status.get(serial), Some((NoteStatus::Active, _))) {
                        r.authenticity_violations += 1;
                    }
                    if matches!(location.get(serial), Some(Location::Custody { .. })) {
                        r.double_custody += 1;
                    }
                    location.insert(
                        *serial,
                        Location::Custody {
                            msb: msb.clone(),
                            account: account.clone(),
                        },
                    );
                }
                LedgerEvent::Debited { msb, account, serial, .. } => {
                    let expected = Location::Custody {
                        msb: msb.clone(),
                        account: account.clone(),
                    };
                    if location.get(serial) != Some(&expected) {
                        r.custody_mismatches += 1;
                    }
                    location.insert(*serial, Location::InFlight);
                }
                LedgerEvent::Lost { serial, .. } => {
                    location.insert(*serial, Location::Lost);
                }
                LedgerEvent::Discarded { serial, .. } => {
                    location.insert(*serial, Location::Discarded);
                }
                LedgerEvent::Consumed { serial, .. } => {
                    location.insert(*serial, Location::Consumed);
                }
            },
            Record::Receipt {
                terminal: true, receipt, ..
            } => {
                if matches!(receipt.outcome, Outcome::RejectedInvalidNote | Outcome::RejectedCert) {
                    r.rejections += 1;
                }
            }
            _ => {}
        }
    }

    for (serial, (st, value)) in &status {
        if *st != NoteStatus::Active {
            continue;
        }
        r.active_value += value;
        match location.get(serial) {
            Some(Location::Custody { .. }) => r.custody_value += value,
            Some(Location::Prepared) => r.stranded_value += value,
            Some(Location::InFlight) => r.in_flight_value += value,
            Some(Location::Lost) => r.lost_value += value,
            Some(Location::Discarded) => r.discarded_value += value,
            Some(Location::Consumed) => r.consumed_unsettled_value += value,
            None => r.unaccounted_value += value,
        }
    }
    r
}

/// Ordered event log of one run, terminated by a summary.
#[derive(Clone, Debug, PartialEq)]
pub struct Transcript {
    pub records: Vec<Record>,
}

impl Transcript {
    /// One JSON object per line, trailing newline included.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let line = serde_json::to_string(r).expect("records serialize");
            writeln!(out, "{line}").expect("writing to a string");
        }
        out
    }

    pub fn from_jsonl(s: &str) -> Result<Self, NetsimError> {
        let records = s
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<Record>, _>>()?;
        Ok(Self { records })
    }

    pub fn summary(&self) -> Option<&Summary> {
        match self.records.last() {
            Some(Record::Summary(s)) => Some(s),
            _ => None,
        }
    }

    /// Records before the summary.
    pub fn events(&self) -> &[Record] {
        match self.records.last() {
            Some(Record::Summary(_)) => &self.records[..self.records.len() - 1],
            _ => &self.records,
        }
    }

    pub fn receipts(&self) -> &[Receipt] {
        self.summary().map(|s| s.receipts.as_slice()).unwrap_or_default()
    }

    /// Refolds the event log.
    pub fn audit(&self) -> AuditReport {
        audit(self.events())
    }

    /// Violated invariants, including disagreement between the fold and
    /// the ledger snapshot taken from entity state.
    pub fn violations(&self) -> Vec<String> {
        let Some(summary) = self.summary() else {
            return vec!["missing-summary".into()];
        };
        let fold = self.audit();
        let mut v = fold.violations(summary.quiescent);
        if fold != summary.audit {
            v.push("audit-mismatch".into());
        }
        if fold.active_value != summary.ledger.ia_active_value {
            v.push("issuer-ledger-mismatch".into());
        }
        if fold.custody_value != summary.ledger.custody_total {
            v.push("custody-ledger-mismatch".into());
        }
        v
    }

    /// Number of send records addressed to `node`.
    pub fn messages_to(&self, node: &str) -> usize {
        self.records
            .iter()
            .filter(|r| matches!(r, Record::Send { to, .. } if to == node))
            .count()
    }
}
