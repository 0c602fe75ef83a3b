use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::money::{AckCiphertext, BanknotePublicKey, DestructionCert, MintInstruction, QuantumBanknote, Serial};
use crate::qsim::HandleId;

pub type NodeId = String;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    MintRequest,
    ClassicalNote,
    AckCipher,
    FinalPk,
    PayAgree,
    PayCommand,
    QNoteTransfer,
    ValidationResult,
    DestroyCert,
    DestroyConfirmRequest,
    MintGrant,
    ReceiptNotice,
    Error,
}

/// Message bodies. Field order is the canonical JSON order.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Payload {
    /// Wallet asks its vault to mint.
    WalletMint { credential: String, value: u64 },
    /// Vault asks the issuer to mint. Carries no wallet data.
    IssueRequest { msb: NodeId, value: u64 },
    Instruction(MintInstruction),
    Ack(AckCiphertext),
    FinalKey(BanknotePublicKey),
    Offer { serial: Serial, value: u64 },
    Accept { receiver_msb: NodeId },
    Pay {
        credential: String,
        serial: Serial,
        receiver: NodeId,
        receiver_msb: NodeId,
        online: bool,
    },
    /// Classical half of a quantum transfer; the state rides in the envelope.
    QNote {
        serial: Serial,
        value: u64,
        payer: NodeId,
        receiver: NodeId,
        key: BanknotePublicKey,
    },
    Validation { serial: Serial, valid: bool },
    Cert {
        cert: DestructionCert,
        value: u64,
        payer: NodeId,
        receiver: NodeId,
    },
    ConfirmDestroy { msb: NodeId, cert: DestructionCert },
    Grant { destroyed: Serial, value: u64 },
    Notice {
        credits: Vec<(Serial, u64)>,
        debits: Vec<(Serial, u64)>,
    },
    Failure { reason: String },
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::WalletMint { .. } | Payload::IssueRequest { .. } => MessageKind::MintRequest,
            Payload::Instruction(_) => MessageKind::ClassicalNote,
            Payload::Ack(_) => MessageKind::AckCipher,
            Payload::FinalKey(_) => MessageKind::FinalPk,
            Payload::Offer { .. } | Payload::Accept { .. } => MessageKind::PayAgree,
            Payload::Pay { .. } => MessageKind::PayCommand,
            Payload::QNote { .. } => MessageKind::QNoteTransfer,
            Payload::Validation { .. } => MessageKind::ValidationResult,
            Payload::Cert { .. } => MessageKind::DestroyCert,
            Payload::ConfirmDestroy { .. } => MessageKind::DestroyConfirmRequest,
            Payload::Grant { .. } => MessageKind::MintGrant,
            Payload::Notice { .. } => MessageKind::ReceiptNotice,
            Payload::Failure { .. } => MessageKind::Error,
        }
    }
}

/// The classical part of every message.
#[derive(Clone, Debug, Serialize)]
pub struct ProtocolMessage {
    pub kind: MessageKind,
    pub from: NodeId,
    pub to: NodeId,
    pub correlation_id: String,
    pub payload: Payload,
}

impl ProtocolMessage {
    pub fn new(from: &str, to: &str, correlation_id: &str, payload: Payload) -> Self {
        Self {
            kind: payload.kind(),
            from: from.to_owned(),
            to: to.to_owned(),
            correlation_id: correlation_id.to_owned(),
            payload,
        }
    }

    /// Key receivers use to drop duplicates.
    pub fn dedup_key(&self) -> (String, MessageKind, NodeId) {
        (self.correlation_id.clone(), self.kind, self.from.clone())
    }
}

/// A message plus, for quantum transfers, the banknote itself. Not `Clone`:
/// an envelope carrying a note can only be moved.
#[derive(Debug)]
pub struct Envelope {
    pub message: ProtocolMessage,
    quantum: Option<QuantumBanknote>,
}

/// Transcript marker for a quantum payload.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantumMarker {
    pub serial: Serial,
    pub handle: HandleId,
    pub quantum: bool,
}

impl Envelope {
    pub fn classical(message: ProtocolMessage) -> Self {
        Self { message, quantum: None }
    }

    pub fn quantum(message: ProtocolMessage, note: QuantumBanknote) -> Self {
        Self {
            message,
            quantum: Some(note),
        }
    }

    pub fn is_quantum(&self) -> bool {
        self.quantum.is_some()
    }

    pub fn marker(&self) -> Option<QuantumMarker> {
        self.quantum.as_ref().map(|n| QuantumMarker {
            serial: n.serial(),
            handle: n.state().id(),
            quantum: true,
        })
    }

    /// Copy of a classical envelope. Quantum envelopes yield `None`.
    pub fn duplicate(&self) -> Option<Envelope> {
        match self.quantum {
            None => Some(Envelope::classical(self.message.clone())),
            Some(_) => None,
        }
    }

    pub fn take_note(&mut self) -> Option<QuantumBanknote> {
        self.quantum.take()
    }

    pub fn into_parts(self) -> (ProtocolMessage, Option<QuantumBanknote>) {
        (self.message, self.quantum)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcessKind {
    Mint,
    InterTransfer,
    IntraTransfer,
    OnlinePayment,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    RejectedInvalidNote,
    RejectedCert,
    Timeout,
    Error(String),
}

impl Outcome {
    pub fn label(&self) -> String {
        match self {
            Outcome::Completed => "completed".into(),
            Outcome::RejectedInvalidNote => "rejected-invalid-note".into(),
            Outcome::RejectedCert => "rejected-cert".into(),
            Outcome::Timeout => "timeout".into(),
            Outcome::Error(reason) => format!("error:{reason}"),
        }
    }

    pub fn is_completed(&self) -> bool {
        *self == Outcome::Completed
    }
}

impl Serialize for Outcome {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.label())
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "completed" => Outcome::Completed,
            "rejected-invalid-note" => Outcome::RejectedInvalidNote,
            "rejected-cert" => Outcome::RejectedCert,
            "timeout" => Outcome::Timeout,
            other => match other.strip_prefix("error:") {
                Some(reason) => Outcome::Error(reason.to_owned()),
                None => return Err(format!("unknown outcome {other:?}")),
            },
        })
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Terminal record of one process instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub correlation_id: String,
    pub process: ProcessKind,
    pub outcome: Outcome,
    pub serials: Vec<Serial>,
    pub amount: u64,
}
