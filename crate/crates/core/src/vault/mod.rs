//! Issuing authority, vault (MSB) and wallet state machines.
//!
//! Entities never share memory. Each one consumes an [`Envelope`] and
//! returns [`Effects`]: outgoing envelopes, terminal receipts, and ledger
//! events that an external observer can fold to audit the run.

mod ia;
mod message;
mod msb;
mod node;
mod system;
mod wallet;

use rand::SeedableRng;
use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::{MoneyError, NoteStatus, Serial};
use crate::qsim::{Engine, EngineConfig};

pub use ia::IssuingAuthorityState;
pub use message::{
    Envelope, MessageKind, NodeId, Outcome, Payload, ProcessKind, ProtocolMessage, QuantumMarker, Receipt,
};
pub use msb::{MsbState, StoredNote};
pub use node::{Node, QuantumWalletState, Role};
pub use system::{
    ia_total_active_value, msb_total_custody_value, process_on_demand_mint, process_online_payment,
    process_transfer_inter_msb, process_transfer_intra_msb, wallet_balance, LocalBus, System, Topology,
};
pub use wallet::WalletState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VaultError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("node {node} is a {actual:?}, expected {expected:?}")]
    WrongRole { node: String, expected: Role, actual: Role },
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("value must be positive")]
    ZeroValue,
    #[error(transparent)]
    Money(#[from] MoneyError),
}

/// Observable bookkeeping emitted by entities.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum LedgerEvent {
    Status {
        serial: Serial,
        value: u64,
        from: Option<NoteStatus>,
        to: NoteStatus,
    },
    Prepared { msb: NodeId, serial: Serial, value: u64 },
    Credited {
        msb: NodeId,
        account: NodeId,
        serial: Serial,
        value: u64,
    },
    Debited {
        msb: NodeId,
        account: NodeId,
        serial: Serial,
        value: u64,
    },
    Consumed { msb: NodeId, serial: Serial, value: u64 },
    Discarded {
        msb: NodeId,
        serial: Serial,
        value: u64,
        reason: String,
    },
    Lost { serial: Serial, value: u64, from: NodeId, to: NodeId },
}

/// Output of one handler step.
#[derive(Debug, Default)]
pub struct Effects {
    pub out: Vec<Envelope>,
    pub receipts: Vec<Receipt>,
    pub events: Vec<LedgerEvent>,
}

impl Effects {
    pub(crate) fn send(&mut self, message: ProtocolMessage) {
        self.out.push(Envelope::classical(message));
    }

    pub(crate) fn merge(&mut self, other: Effects) {
        self.out.extend(other.out);
        self.receipts.extend(other.receipts);
        self.events.extend(other.events);
    }
}

/// Shared execution context: the quantum engine and the classical random
/// stream used for keys, serials and subspaces.
pub struct Ctx {
    pub engine: Engine,
    pub rng: ChaCha8Rng,
}

impl Ctx {
    /// Engine and classical randomness on separate streams of one seed.
    pub fn new(seed: u64, max_qubits: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut engine_stream = ChaCha8Rng::seed_from_u64(seed);
        engine_stream.set_stream(1);
        let engine = Engine::new(EngineConfig::new(engine_stream.next_u64()).with_max_qubits(max_qubits));
        rng.set_stream(0);
        Self { engine, rng }
    }

    /// Like [`Ctx::new`] with amplitude access, for tests.
    pub fn omniscient(seed: u64, max_qubits: usize) -> Self {
        let mut ctx = Self::new(seed, max_qubits);
        let config = *ctx.engine.config();
        ctx.engine = Engine::new(config.omniscient());
        ctx
    }
}
