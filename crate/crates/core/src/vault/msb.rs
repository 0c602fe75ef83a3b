use std::collections::{BTreeMap, BTreeSet};

use super::message::{MessageKind, NodeId, Outcome, Payload, ProcessKind, ProtocolMessage, Receipt};
use super::{Ctx, Effects, Envelope, LedgerEvent};
use crate::money::{gen_cert, qv, rec_mint, BanknotePublicKey, QuantumBanknote, SchemePublicKey, Serial};

/// A custodied banknote together with its public key.
#[derive(Debug)]
pub struct StoredNote {
    pub note: QuantumBanknote,
    pub key: BanknotePublicKey,
}

#[derive(Clone, Debug)]
enum Pending {
    Mint { account: NodeId },
    Online {
        account: NodeId,
        destroyed: Serial,
        value: u64,
    },
}

/// A quantum vault holding notes on behalf of classical wallets.
pub struct MsbState {
    id: NodeId,
    ia: NodeId,
    scheme_pk: SchemePublicKey,
    credentials: BTreeMap<NodeId, String>,
    custody: BTreeMap<NodeId, BTreeSet<Serial>>,
    vault_storage: BTreeMap<Serial, StoredNote>,
    minting: BTreeMap<String, QuantumBanknote>,
    pending: BTreeMap<String, Pending>,
    seen: BTreeSet<(String, MessageKind, NodeId)>,
}

impl MsbState {
    pub fn new(id: &str, ia: &str, scheme_pk: SchemePublicKey) -> Self {
        Self {
            id: id.to_owned(),
            ia: ia.to_owned(),
            scheme_pk,
            credentials: BTreeMap::new(),
            custody: BTreeMap::new(),
            vault_storage: BTreeMap::new(),
            minting: BTreeMap::new(),
            pending: BTreeMap::new(),
            seen: BTreeSet::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Opens an account for `wallet` with the given bearer token.
    pub fn register(&mut self, wallet: &str, credential: &str) {
        self.credentials.insert(wallet.to_owned(), credential.to_owned());
        self.custody.entry(wallet.to_owned()).or_default();
    }

    pub fn is_registered(&self, account: &str) -> bool {
        self.credentials.contains_key(account)
    }

    pub fn custody(&self) -> &BTreeMap<NodeId, BTreeSet<Serial>> {
        &self.custody
    }

    /// Serials held for `account`, in increasing order.
    pub fn serials_of(&self, account: &str) -> Vec<Serial> {
        self.custody
            .get(account)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default()
    }

    pub fn stored(&self, serial: Serial) -> Option<&StoredNote> {
        self.vault_storage.get(&serial)
    }

    pub fn stored_serials(&self) -> BTreeSet<Serial> {
        self.vault_storage.keys().copied().collect()
    }

    pub fn value_of(&self, serial: Serial) -> Option<u64> {
        self.vault_storage.get(&serial).map(|s| s.key.value)
    }

    /// Sum of values of all custodied notes.
    pub fn total_custody_value(&self) -> u64 {
        self.custody
            .values()
            .flatten()
            .filter_map(|s| self.value_of(*s))
            .sum()
    }

    pub fn account_value(&self, account: &str) -> u64 {
        self.serials_of(account)
            .iter()
            .filter_map(|s| self.value_of(*s))
            .sum()
    }

    /// Notes prepared but not yet activated by the issuer.
    pub fn minting_count(&self) -> usize {
        self.minting.len()
    }

    fn msg(&self, to: &str, corr: &str, payload: Payload) -> ProtocolMessage {
        ProtocolMessage::new(&self.id, to, corr, payload)
    }

    fn receipt(fx: &mut Effects, corr: &str, process: ProcessKind, outcome: Outcome, serials: Vec<Serial>, amount: u64) {
        fx.receipts.push(Receipt {
            correlation_id: corr.to_owned(),
            process,
            outcome,
            serials,
            amount,
        });
    }

    fn notify(&self, fx: &mut Effects, wallet: &str, corr: &str, credits: Vec<(Serial, u64)>, debits: Vec<(Serial, u64)>) {
        fx.send(self.msg(wallet, corr, Payload::Notice { credits, debits }));
    }

    fn credit(&mut self, fx: &mut Effects, account: &str, stored: StoredNote) -> (Serial, u64) {
        let serial = stored.key.serial;
        let value = stored.key.value;
        self.custody.entry(account.to_owned()).or_default().insert(serial);
        self.vault_storage.insert(serial, stored);
        fx.events.push(LedgerEvent::Credited {
            msb: self.id.clone(),
            account: account.to_owned(),
            serial,
            value,
        });
        (serial, value)
    }

    fn debit(&mut self, fx: &mut Effects, account: &str, serial: Serial) -> Option<StoredNote> {
        let held = self.custody.get_mut(account)?;
        if !held.remove(&serial) {
            return None;
        }
        let stored = self.vault_storage.remove(&serial)?;
        fx.events.push(LedgerEvent::Debited {
            msb: self.id.clone(),
            account: account.to_owned(),
            serial,
            value: stored.key.value,
        });
        Some(stored)
    }

    fn discard(&mut self, fx: &mut Effects, note: QuantumBanknote, reason: &str, ctx: &mut Ctx) {
        fx.events.push(LedgerEvent::Discarded {
            msb: self.id.clone(),
            serial: note.serial(),
            value: note.value(),
            reason: reason.to_owned(),
        });
        let _ = ctx.engine.discard(note.into_state());
    }

    pub fn handle(&mut self, env: Envelope, ctx: &mut Ctx) -> Effects {
        let mut fx = Effects::default();
        let (msg, note) = env.into_parts();
        if !self.seen.insert(msg.dedup_key()) {
            if let Some(note) = note {
                self.discard(&mut fx, note, "duplicate-delivery", ctx);
            }
            return fx;
        }
        let corr = msg.correlation_id.clone();
        match msg.payload {
            Payload::WalletMint { credential, value } => {
                if self.credentials.get(&msg.from) != Some(&credential) {
                    Self::receipt(&mut fx, &corr, ProcessKind::Mint, Outcome::Error("bad-credential".into()), vec![], value);
                } else if value == 0 {
                    Self::receipt(&mut fx, &corr, ProcessKind::Mint, Outcome::Error("zero-value".into()), vec![], 0);
                } else {
                    self.pending.insert(corr.clone(), Pending::Mint { account: msg.from.clone() });
                    let request = self.msg(&self.ia, &corr, Payload::IssueRequest { msb: self.id.clone(), value });
                    fx.send(request);
                }
            }
            Payload::Instruction(instruction) => {
                let Some(pending) = self.pending.get(&corr).cloned() else {
                    return fx;
                };
                match rec_mint(&self.scheme_pk, instruction, &self.id, &mut ctx.engine) {
                    Ok((note, ack)) => {
                        fx.events.push(LedgerEvent::Prepared {
                            msb: self.id.clone(),
                            serial: note.serial(),
                            value: note.value(),
                        });
                        if let Some(old) = self.minting.insert(corr.clone(), note) {
                            self.discard(&mut fx, old, "superseded", ctx);
                        }
                        let ack = self.msg(&self.ia, &corr, Payload::Ack(ack));
                        fx.send(ack);
                    }
                    Err(e) => {
                        self.pending.remove(&corr);
                        self.fail_pending(&mut fx, &corr, pending, &format!("rec-mint:{e}"));
                    }
                }
            }
            Payload::FinalKey(key) => {
                let Some(pending) = self.pending.remove(&corr) else {
                    return fx;
                };
                let Some(note) = self.minting.remove(&corr) else {
                    self.fail_pending(&mut fx, &corr, pending, "no-prepared-note");
                    return fx;
                };
                if !self.scheme_pk.verify_banknote_key(&key) || key.serial != note.serial() || key.value != note.value() {
                    self.discard(&mut fx, note, "bad-final-key", ctx);
                    self.fail_pending(&mut fx, &corr, pending, "bad-final-key");
                    return fx;
                }
                match pending {
                    Pending::Mint { account } => {
                        let (serial, value) = self.credit(&mut fx, &account, StoredNote { note, key });
                        Self::receipt(&mut fx, &corr, ProcessKind::Mint, Outcome::Completed, vec![serial], value);
                        self.notify(&mut fx, &account, &corr, vec![(serial, value)], vec![]);
                    }
                    Pending::Online { account, destroyed, .. } => {
                        let (serial, value) = self.credit(&mut fx, &account, StoredNote { note, key });
                        Self::receipt(
                            &mut fx,
                            &corr,
                            ProcessKind::OnlinePayment,
                            Outcome::Completed,
                            vec![destroyed, serial],
                            value,
                        );
                        self.notify(&mut fx, &account, &corr, vec![(serial, value)], vec![]);
                    }
                }
            }
            Payload::Failure { reason } => {
                if let Some(note) = self.minting.remove(&corr) {
                    self.discard(&mut fx, note, &reason, ctx);
                }
                if let Some(pending) = self.pending.remove(&corr) {
                    self.fail_pending(&mut fx, &corr, pending, &reason);
                }
            }
            Payload::Pay {
                credential,
                serial,
                receiver,
                receiver_msb,
                online,
            } => {
                let payer = msg.from.clone();
                let process = if online {
                    ProcessKind::OnlinePayment
                } else if receiver_msb == self.id {
                    ProcessKind::IntraTransfer
                } else {
                    ProcessKind::InterTransfer
                };
                if self.credentials.get(&payer) != Some(&credential) {
                    Self::receipt(&mut fx, &corr, process, Outcome::Error("bad-credential".into()), vec![serial], 0);
                    return fx;
                }
                let owned = self.custody.get(&payer).is_some_and(|s| s.contains(&serial));
                if !owned {
                    Self::receipt(&mut fx, &corr, process, Outcome::Error("not-in-custody".into()), vec![serial], 0);
                    return fx;
                }
                if receiver_msb == self.id && !self.is_registered(&receiver) {
                    Self::receipt(&mut fx, &corr, process, Outcome::Error("unknown-receiver".into()), vec![serial], 0);
                    return fx;
                }
                match process {
                    ProcessKind::IntraTransfer => self.intra(&mut fx, &corr, &payer, &receiver, serial),
                    ProcessKind::InterTransfer => {
                        let stored = self.debit(&mut fx, &payer, serial).expect("custody checked");
                        let value = stored.key.value;
                        self.notify(&mut fx, &payer, &corr, vec![], vec![(serial, value)]);
                        let header = self.msg(
                            &receiver_msb,
                            &corr,
                            Payload::QNote {
                                serial,
                                value,
                                payer: payer.clone(),
                                receiver,
                                key: stored.key,
                            },
                        );
                        fx.out.push(Envelope::quantum(header, stored.note));
                    }
                    _ => self.online(&mut fx, &corr, &payer, &receiver, &receiver_msb, serial, ctx),
                }
            }
            Payload::QNote {
                serial,
                value,
                receiver,
                key,
                ..
            } => {
                let Some(note) = note else {
                    Self::receipt(&mut fx, &corr, ProcessKind::InterTransfer, Outcome::RejectedInvalidNote, vec![serial], value);
                    return fx;
                };
                let genuine_key = self.scheme_pk.verify_banknote_key(&key) && key.serial == serial && key.value == value;
                if !genuine_key || !self.is_registered(&receiver) {
                    self.discard(&mut fx, note, "bad-key-or-receiver", ctx);
                    Self::receipt(&mut fx, &corr, ProcessKind::InterTransfer, Outcome::RejectedInvalidNote, vec![serial], value);
                    let reply = self.msg(&msg.from, &corr, Payload::Validation { serial, valid: false });
                    fx.send(reply);
                    return fx;
                }
                let verdict = qv(&key, note, &mut ctx.engine);
                match verdict {
                    Ok((true, note)) => {
                        self.credit(&mut fx, &receiver, StoredNote { note, key });
                        Self::receipt(&mut fx, &corr, ProcessKind::InterTransfer, Outcome::Completed, vec![serial], value);
                        self.notify(&mut fx, &receiver, &corr, vec![(serial, value)], vec![]);
                        let reply = self.msg(&msg.from, &corr, Payload::Validation { serial, valid: true });
                        fx.send(reply);
                    }
                    Ok((false, note)) => {
                        self.discard(&mut fx, note, "qv-failed", ctx);
                        Self::receipt(&mut fx, &corr, ProcessKind::InterTransfer, Outcome::RejectedInvalidNote, vec![serial], value);
                        let reply = self.msg(&msg.from, &corr, Payload::Validation { serial, valid: false });
                        fx.send(reply);
                    }
                    Err(e) => {
                        fx.events.push(LedgerEvent::Discarded {
                            msb: self.id.clone(),
                            serial,
                            value,
                            reason: format!("qv-error:{e}"),
                        });
                        Self::receipt(&mut fx, &corr, ProcessKind::InterTransfer, Outcome::RejectedInvalidNote, vec![serial], value);
                        let reply = self.msg(&msg.from, &corr, Payload::Validation { serial, valid: false });
                        fx.send(reply);
                    }
                }
            }
            Payload::Cert { cert, value, receiver, .. } => self.on_cert(&mut fx, &corr, cert, value, &receiver),
            Payload::Validation { .. } | Payload::Grant { .. } => {}
            _ => {
                if let Some(note) = note {
                    self.discard(&mut fx, note, "unexpected", ctx);
                }
            }
        }
        fx
    }

    fn fail_pending(&self, fx: &mut Effects, corr: &str, pending: Pending, reason: &str) {
        match pending {
            Pending::Mint { .. } => {
                Self::receipt(fx, corr, ProcessKind::Mint, Outcome::RejectedCert, vec![], 0);
            }
            Pending::Online { destroyed, value, .. } => {
                let outcome = if reason.starts_with("cert:") {
                    Outcome::RejectedCert
                } else {
                    Outcome::Error(reason.to_owned())
                };
                Self::receipt(fx, corr, ProcessKind::OnlinePayment, outcome, vec![destroyed], value);
            }
        }
    }

    fn intra(&mut self, fx: &mut Effects, corr: &str, payer: &str, receiver: &str, serial: Serial) {
        let value = self.value_of(serial).unwrap_or(0);
        if payer != receiver {
            let stored = self.debit(fx, payer, serial).expect("custody checked");
            self.credit(fx, receiver, stored);
            self.notify(fx, payer, corr, vec![], vec![(serial, value)]);
            self.notify(fx, receiver, corr, vec![(serial, value)], vec![]);
        }
        Self::receipt(fx, corr, ProcessKind::IntraTransfer, Outcome::Completed, vec![serial], value);
    }

    #[allow(clippy::too_many_arguments)]
    fn online(
        &mut self,
        fx: &mut Effects,
        corr: &str,
        payer: &str,
        receiver: &str,
        receiver_msb: &str,
        serial: Serial,
        ctx: &mut Ctx,
    ) {
        let stored = self.debit(fx, payer, serial).expect("custody checked");
        let value = stored.key.value;
        self.notify(fx, payer, corr, vec![], vec![(serial, value)]);
        let cert = match gen_cert(&stored.key, stored.note, &mut ctx.engine) {
            Ok(cert) => cert,
            Err(e) => {
                fx.events.push(LedgerEvent::Discarded {
                    msb: self.id.clone(),
                    serial,
                    value,
                    reason: format!("gen-cert:{e}"),
                });
                Self::receipt(fx, corr, ProcessKind::OnlinePayment, Outcome::Error(format!("gen-cert:{e}")), vec![serial], value);
                return;
            }
        };
        fx.events.push(LedgerEvent::Consumed {
            msb: self.id.clone(),
            serial,
            value,
        });
        if receiver_msb == self.id {
            self.on_cert(fx, corr, cert, value, receiver);
        } else {
            let msg = self.msg(
                receiver_msb,
                corr,
                Payload::Cert {
                    cert,
                    value,
                    payer: payer.to_owned(),
                    receiver: receiver.to_owned(),
                },
            );
            fx.send(msg);
        }
    }

    fn on_cert(&mut self, fx: &mut Effects, corr: &str, cert: crate::money::DestructionCert, value: u64, receiver: &str) {
        if !self.is_registered(receiver) {
            Self::receipt(fx, corr, ProcessKind::OnlinePayment, Outcome::Error("unknown-receiver".into()), vec![cert.serial], value);
            return;
        }
        self.pending.insert(
            corr.to_owned(),
            Pending::Online {
                account: receiver.to_owned(),
                destroyed: cert.serial,
                value,
            },
        );
        let msg = self.msg(&self.ia, corr, Payload::ConfirmDestroy { msb: self.id.clone(), cert });
        fx.send(msg);
    }
}
