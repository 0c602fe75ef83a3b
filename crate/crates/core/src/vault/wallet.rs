use std::collections::{BTreeMap, BTreeSet};

use super::message::{MessageKind, NodeId, Payload, ProtocolMessage};
use super::{Effects, Envelope};
use crate::money::Serial;

#[derive(Clone, Debug)]
struct PendingPay {
    serial: Serial,
    receiver: NodeId,
    online: bool,
}

/// A classical end-user wallet. It holds a bearer token and serial
/// references learned from its vault's notices, never quantum state.
#[derive(Clone, Debug)]
pub struct WalletState {
    id: NodeId,
    credential: String,
    home_msb: NodeId,
    pending: BTreeMap<String, PendingPay>,
    holdings: BTreeMap<Serial, u64>,
    seen: BTreeSet<(String, MessageKind, NodeId)>,
}

impl WalletState {
    pub fn new(id: &str, home_msb: &str, credential: &str) -> Self {
        Self {
            id: id.to_owned(),
            credential: credential.to_owned(),
            home_msb: home_msb.to_owned(),
            pending: BTreeMap::new(),
            holdings: BTreeMap::new(),
            seen: BTreeSet::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn home_msb(&self) -> &str {
        &self.home_msb
    }

    pub fn credential(&self) -> &str {
        &self.credential
    }

    /// Serials this wallet believes it owns, in increasing order.
    pub fn holdings(&self) -> Vec<Serial> {
        self.holdings.keys().copied().collect()
    }

    pub fn balance(&self) -> u64 {
        self.holdings.values().sum()
    }

    /// Asks the home vault to mint a note of `value`.
    pub fn start_mint(&mut self, corr: &str, value: u64) -> Effects {
        let mut fx = Effects::default();
        fx.send(ProtocolMessage::new(
            &self.id,
            &self.home_msb,
            corr,
            Payload::WalletMint {
                credential: self.credential.clone(),
                value,
            },
        ));
        fx
    }

    /// Opens the payment agreement with `receiver`.
    pub fn start_pay(&mut self, corr: &str, receiver: &str, serial: Serial, online: bool) -> Effects {
        let mut fx = Effects::default();
        if receiver == self.id {
            fx.send(ProtocolMessage::new(
                &self.id,
                &self.home_msb,
                corr,
                Payload::Pay {
                    credential: self.credential.clone(),
                    serial,
                    receiver: self.id.clone(),
                    receiver_msb: self.home_msb.clone(),
                    online,
                },
            ));
            return fx;
        }
        self.pending.insert(
            corr.to_owned(),
            PendingPay {
                serial,
                receiver: receiver.to_owned(),
                online,
            },
        );
        let value = self.holdings.get(&serial).copied().unwrap_or(0);
        fx.send(ProtocolMessage::new(&self.id, receiver, corr, Payload::Offer { serial, value }));
        fx
    }

    pub fn handle(&mut self, env: Envelope) -> Effects {
        let mut fx = Effects::default();
        let (msg, _) = env.into_parts();
        if let Payload::Notice { credits, debits } = &msg.payload {
            // Notices are idempotent set updates and need no deduplication.
            if msg.from == self.home_msb {
                for (serial, _) in debits {
                    self.holdings.remove(serial);
                }
                for (serial, value) in credits {
                    self.holdings.insert(*serial, *value);
                }
            }
            return fx;
        }
        if !self.seen.insert(msg.dedup_key()) {
            return fx;
        }
        match &msg.payload {
            Payload::Offer { .. } => {
                fx.send(ProtocolMessage::new(
                    &self.id,
                    &msg.from,
                    &msg.correlation_id,
                    Payload::Accept {
                        receiver_msb: self.home_msb.clone(),
                    },
                ));
            }
            Payload::Accept { receiver_msb } => {
                let Some(p) = self.pending.remove(&msg.correlation_id) else {
                    return fx;
                };
                if p.receiver != msg.from {
                    return fx;
                }
                fx.send(ProtocolMessage::new(
                    &self.id,
                    &self.home_msb,
                    &msg.correlation_id,
                    Payload::Pay {
                        credential: self.credential.clone(),
                        serial: p.serial,
                        receiver: p.receiver,
                        receiver_msb: receiver_msb.clone(),
                        online: p.online,
                    },
                ));
            }
            _ => {}
        }
        fx
    }
}
