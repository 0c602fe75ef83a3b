use std::collections::BTreeSet;

use super::message::{MessageKind, NodeId, Payload, ProtocolMessage};
use super::{Ctx, Effects, Envelope, LedgerEvent};
use crate::money::{
    bank_mint, cv, finalize_mint, gen, NoteStatus, SchemeParams, SchemePublicKey, SchemeSecretKey, Serial,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IaCounters {
    pub mint_requests: u64,
    pub finalized: u64,
    pub destroy_requests: u64,
    pub destroyed: u64,
    pub rejected: u64,
}

/// The classical issuer: scheme keys and the serial registry.
pub struct IssuingAuthorityState {
    id: NodeId,
    pk: SchemePublicKey,
    sk: SchemeSecretKey,
    seen: BTreeSet<(String, MessageKind, NodeId)>,
    counters: IaCounters,
}

impl IssuingAuthorityState {
    pub fn new(id: &str, params: SchemeParams, ctx: &mut Ctx) -> Self {
        let (pk, sk) = gen(params, &mut ctx.rng);
        Self {
            id: id.to_owned(),
            pk,
            sk,
            seen: BTreeSet::new(),
            counters: IaCounters::default(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn public_key(&self) -> &SchemePublicKey {
        &self.pk
    }

    pub fn registry(&self) -> &SchemeSecretKey {
        &self.sk
    }

    pub fn counters(&self) -> IaCounters {
        self.counters
    }

    pub fn total_active_value(&self) -> u64 {
        self.sk.total_active_value()
    }

    fn reply(&self, to: &ProtocolMessage, payload: Payload) -> ProtocolMessage {
        ProtocolMessage::new(&self.id, &to.from, &to.correlation_id, payload)
    }

    fn fail(&mut self, fx: &mut Effects, to: &ProtocolMessage, reason: impl Into<String>) {
        self.counters.rejected += 1;
        let reply = self.reply(to, Payload::Failure { reason: reason.into() });
        fx.send(reply);
    }

    fn mint_to(&mut self, fx: &mut Effects, request: &ProtocolMessage, value: u64, ctx: &mut Ctx) {
        match bank_mint(&mut self.sk, value, &mut ctx.rng) {
            Ok((note, instruction)) => {
                fx.events.push(LedgerEvent::Status {
                    serial: note.serial,
                    value,
                    from: None,
                    to: NoteStatus::Pending,
                });
                let reply = self.reply(request, Payload::Instruction(instruction));
                fx.send(reply);
            }
            Err(e) => self.fail(fx, request, format!("mint-failed:{e}")),
        }
    }

    pub fn handle(&mut self, env: Envelope, ctx: &mut Ctx) -> Effects {
        let mut fx = Effects::default();
        let (msg, note) = env.into_parts();
        if let Some(note) = note {
            // The issuer has no quantum hardware; a stray note is destroyed.
            let _ = ctx.engine.discard(note.into_state());
        }
        if !self.seen.insert(msg.dedup_key()) {
            return fx;
        }
        match &msg.payload {
            Payload::IssueRequest { value, .. } => {
                self.counters.mint_requests += 1;
                let value = *value;
                self.mint_to(&mut fx, &msg, value, ctx);
            }
            Payload::Ack(ack) => {
                if ack.vault_id != msg.from {
                    self.fail(&mut fx, &msg, "ack-sender-mismatch");
                    return fx;
                }
                match finalize_mint(&mut self.sk, ack) {
                    Ok(key) => {
                        self.counters.finalized += 1;
                        fx.events.push(LedgerEvent::Status {
                            serial: key.serial,
                            value: key.value,
                            from: Some(NoteStatus::Pending),
                            to: NoteStatus::Active,
                        });
                        let reply = self.reply(&msg, Payload::FinalKey(key));
                        fx.send(reply);
                    }
                    Err(e) => self.fail(&mut fx, &msg, format!("finalize:{e}")),
                }
            }
            Payload::ConfirmDestroy { cert, .. } => {
                self.counters.destroy_requests += 1;
                let verdict = cv(&self.sk, cert);
                if !verdict.valid {
                    let reason = serde_json::to_value(verdict.reason)
                        .ok()
                        .and_then(|v| v.as_str().map(str::to_owned))
                        .unwrap_or_default();
                    self.fail(&mut fx, &msg, format!("cert:{reason}"));
                    return fx;
                }
                let serial: Serial = cert.serial;
                match self.sk.destroy(serial) {
                    Ok(value) => {
                        self.counters.destroyed += 1;
                        fx.events.push(LedgerEvent::Status {
                            serial,
                            value,
                            from: Some(NoteStatus::Active),
                            to: NoteStatus::Destroyed,
                        });
                        let grant = self.reply(&msg, Payload::Grant { destroyed: serial, value });
                        fx.send(grant);
                        self.mint_to(&mut fx, &msg, value, ctx);
                    }
                    Err(e) => self.fail(&mut fx, &msg, format!("destroy:{e}")),
                }
            }
            Payload::Failure { .. } => {}
            _ => self.fail(&mut fx, &msg, format!("unexpected:{:?}", msg.kind)),
        }
        fx
    }
}
